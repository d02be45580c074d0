# Source code module
