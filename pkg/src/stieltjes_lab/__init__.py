"""High-precision Stieltjes constants and continued-fraction / digit diagnostics."""

import sys

# values here routinely run to tens of thousands of digits
if hasattr(sys, "set_int_max_str_digits"):
    sys.set_int_max_str_digits(0)

__version__ = "0.1.0"
