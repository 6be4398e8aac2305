"""In-situ battery life prediction and classification from relaxation data.

The pipeline: ingest or simulate cycling data, identify second-order
equivalent-circuit parameters from each cycle's post-charge voltage
relaxation (aging state), difference curves between cycles for degradation
rate, then learn remaining useful life with Gaussian-process regression
and a three-way life class with a DAG of binary Gaussian-process
classifiers.
"""

__version__ = "0.1.0"

from . import dataset, ecm, experiments, features, gpc, gpr, modelio, simgen  # noqa: E402,F401
