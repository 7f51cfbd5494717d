# Config, errors and evaluation accounting
