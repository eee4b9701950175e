# utils/__init__.py

"""
Utils Package
Exceptions, parsing, date arithmetic, formatting and seeding helpers.
"""
