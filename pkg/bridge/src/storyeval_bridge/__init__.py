"""Bridge between real NLP pipelines and the storyeval engine.

The engine consumes line-delimited JSON records and score files; this
package produces them from actual models: POS/lemma/NER annotations,
teacher-forced subword log-probability traces, top-k generations, and the
context-length dataset filter. It never computes a metric itself, so the
metric implementations stay single-sourced on the engine side, and it never
imports the engine: the record and score-file formats are the whole
contract.
"""

__version__ = "0.1.0"


class BridgeError(Exception):
    """Job-level failure: bad input, unloadable model, broken alignment."""
