"""Special-function kernels and precision-escalating series evaluation"""
