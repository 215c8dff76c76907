import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running oracle or dataset checks")
    config.addinivalue_line("markers", "heavy: acceptance runs that need the generated datasets")
