import os
import sys

# make the package and app.py importable without installing
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
