"""
flaky-mender: reproduce, trace and repair flaky Go tests.
"""
