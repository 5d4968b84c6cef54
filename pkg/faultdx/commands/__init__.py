class UsageException(Exception):
    """Bad command-line usage, exits with the usage code"""
