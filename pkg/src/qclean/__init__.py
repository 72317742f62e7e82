"""Query-driven probabilistic data cleaning."""

from .config import EngineConfig
from .engine import QueryRecord, ResultSet, Session
from .errors import QCleanError
from .model import Candidate, Range, Relation, Schema, Uncertain, most_probable
from .offline import offline_clean
from .rules import parse_rules
from .store import load_csv, load_prob, load_schema, save_csv, save_prob

__version__ = "0.1.0"

__all__ = ["EngineConfig", "Session", "ResultSet", "QueryRecord", "QCleanError", "Candidate", "Range",
           "Relation", "Schema", "Uncertain", "most_probable", "offline_clean", "parse_rules", "load_csv",
           "load_prob", "load_schema", "save_csv", "save_prob"]
