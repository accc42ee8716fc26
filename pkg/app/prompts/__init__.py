"""
Prompt templates for the repair pipeline.
"""
