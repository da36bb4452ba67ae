"""Self-adaptive systems toolkit.

Subpackages and modules:

* ``engine``: timed-automata language, parser and simulator
* ``smc``: statistical model checking (probability and mean estimation)
* ``deltaiot``: multi-hop sensor network simulator
* ``qmodels``: quality models over the network, native and engine-based
* ``mape``: the feedback loop and its knowledge
* ``evolve``: staging, validating and activating goal and model updates
* ``verify``: explicit-state checking of the loop model on stub scenarios
* ``healthsvc``: service-composition workflow as a second managed system
* ``experiment`` and ``cli``: experiment harness and command line
"""

__version__ = "0.1.0"
