import sys
from pathlib import Path

# make tests/helpers.py and tests/fixture_corpus.py importable
sys.path.insert(0, str(Path(__file__).parent))
