"""
Visualization package for the eye-biomarker study
"""

from .chart_service import ChartService, safe_name
