import sys
from src.logger import logging

def error_message_detail(error,error_detail:sys):
    _,_,exc_tb=error_detail.exc_info()
    if exc_tb is not None:
        file_name=exc_tb.tb_frame.f_code.co_filename
        line_no = exc_tb.tb_lineno
    else:
        # raised directly, not re-raised from a handler
        file_name = "Unknown"
        line_no = "Unknown"
    error_message="Error occured in python script name [{0}] line number [{1}] error message[{2}]".format(
     file_name,line_no,str(error))

    return error_message


class CustomException(Exception):
    def __init__(self,error_message,error_detail:sys):
        super().__init__(error_message)
        self.reason=str(error_message)
        self.error_message=error_message_detail(error_message,error_detail=error_detail)

    def __str__(self):
        return self.error_message


class DomainError(CustomException):
    """A numeric argument lies outside the domain where the quantity is defined."""

    def __init__(self, error_message):
        super().__init__(error_message, sys)
        logging.warning(f"domain error: {error_message}")


class StructuralError(CustomException):
    """Inconsistent combinatorial input: strips, serialized text, back-maps, annotations."""

    def __init__(self, error_message):
        super().__init__(error_message, sys)
        logging.warning(f"structural error: {error_message}")


class ResourceError(CustomException):
    """An exact enumeration would exceed its configured budget."""

    def __init__(self, error_message, required=None, budget=None):
        super().__init__(error_message, sys)
        self.required = required
        self.budget = budget
        logging.warning(f"resource error: {error_message} (required={required}, budget={budget})")


class DivergenceError(CustomException):
    """The annealed partition function has no finite large-N limit at the requested point."""

    def __init__(self, error_message, verdict=None):
        super().__init__(error_message, sys)
        self.verdict = verdict
        logging.warning(f"divergence: {error_message}")


class ConfigError(CustomException):
    """Invalid run configuration; carries every violation found, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems), sys)
        logging.warning(f"config error: {self.problems}")
