"""Evidence-seeking hypothesis ranking over knowledge graphs.

Role-specialized agent policies (a strategic monitor, a hypothesis seeder,
a supportive builder, and an adversarial challenger) construct and score a
task-specific evidence graph, then self-improve through textual feedback
and a transferable heuristic library.
"""

__version__ = "0.1.0"
