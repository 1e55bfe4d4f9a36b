"""
Test modules for the SIT-LMPC library and experiment harness.
"""
