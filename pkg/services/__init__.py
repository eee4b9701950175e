# services/__init__.py

"""
Services package for the eye-biomarker study
"""
