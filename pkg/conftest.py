"""Gör modulerna i projektroten importerbara från tests/"""
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
