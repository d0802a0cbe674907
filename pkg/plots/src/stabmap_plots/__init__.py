"""Figure rendering for stabmap output directories.

Read-only consumers of the documented CSV/JSON interfaces: boundary.csv +
meta.json from `stabmap sweep`, modes.csv from `stabmap modes`, and
timeseries.csv from `stabmap simulate`.  No physics is recomputed here.
"""

__version__ = "0.1.0"

import matplotlib

matplotlib.use("Agg")
# content-hashed ids keep repeated SVG renders byte-identical
matplotlib.rcParams["svg.hashsalt"] = "stabmap-plots"
