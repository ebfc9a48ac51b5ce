from mesoed.util.exceptions import *
from mesoed.util.util import *
