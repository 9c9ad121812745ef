"""CSV and markdown report generation"""
