"""
Tests for contractsolve v1.0.0
"""
