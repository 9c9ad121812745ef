"""Utility modules for dB conversion, numeric helpers, and formatting"""
