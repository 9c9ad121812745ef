"""Closed-form and asymptotic performance analysis"""
