import os
import sys
from pathlib import Path

import hypothesis
import numpy as np

# Add the app directory to the path
sys.path.append(str(Path(__file__).parent / "app"))

np.seterr(all="warn")

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.register_profile("thorough", max_examples=500, deadline=None)
hypothesis.settings.load_profile(os.getenv("SQUIDCAV_HYPOTHESIS_PROFILE", "default"))
