# -*- coding: utf-8 -*-
__all__ = [
    "Error",
    "InterfaceError",
    "ProgrammingError",
    "DataError",
    "OperationalError",
]


class Error(Exception):
    pass


class InterfaceError(Error):
    pass


class ProgrammingError(InterfaceError):
    pass


class DataError(Error):
    pass


class OperationalError(Error):
    pass
