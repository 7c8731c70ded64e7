"""Certificates for stationarity and constraint qualifications of
nonsmooth MPECs via tangential subdifferentials."""

__version__ = "0.1.0"
