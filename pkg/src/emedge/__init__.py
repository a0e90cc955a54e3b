"""emedge: an edge-deployable energy-efficiency service.

Ingests appliance power, occupancy, and environment telemetry; labels
consumption with micro-moment classes via a rule engine; trains classifiers
that reproduce those labels; and delivers explainable, persuasive
energy-saving recommendations shaped by user feedback. A bundled household
simulator provides labeled synthetic data.
"""

__version__ = "0.1.0"
