"""Integration tests for deepcv.

These run the command line end to end on synthetic images with realistic iteration
counts. No external services or datasets are needed, only CPU time.

To run:
    uv run pytest tests/test_integration/ -v --no-cov
"""
