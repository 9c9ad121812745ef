"""Monte Carlo link simulation"""
