"""calibforge: confidence calibration toolkit for binary win predictors.

The package covers the full loop for the two-class (win/lose) setting:

* ``datagen``  -- synthetic per-minute match states with known ground-truth
  win probability and input-dependent label noise
* ``nn``       -- a small dense network with manual backprop and Adam
* ``duloss``   -- the data-uncertainty training loss (density head +
  reparameterized Monte-Carlo softmax averaging)
* ``scaling``  -- post-hoc temperature / vector / matrix scaling
* ``metrics``  -- reliability binning, ECE / MCE / NLL, report emission
* ``cli``      -- the ``calibforge`` command wiring everything together
"""

__version__ = "0.1.0"
