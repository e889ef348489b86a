"""
Command-line tools (`python -m src.tools.cli`)
"""
