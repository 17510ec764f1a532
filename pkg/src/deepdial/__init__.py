"""deepdial: trainable task-oriented dialogue policy engine.

Learns action selection with deep Q-learning directly from raw-text
features of the last system and (noisy) user utterances, under
per-state constrained action sets, in a client-server environment
with a rule-based user simulator and a human chat mode.
"""

__version__ = "0.1.0"

from deepdial.acts import CATALOG, DialogueAct
from deepdial.net import QNetwork

__all__ = ["CATALOG", "DialogueAct", "QNetwork", "__version__"]
