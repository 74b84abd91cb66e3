"""Tamper-evident event recording with ledger-backed proofs and explanations."""

from .errors import ConfigError, FormatError, LedgerError, TraceboxError
from .hashchain import ChainState, Digest, init_chain, random_seed
from .ledger import Account, Ledger, create_account
from .policy import SamplingPolicy
from .recorder import BagWriter, LedgerBinding, MessageRecord, open_bag, read_bag
from .verifier import VerificationReport, verify_bag

__version__ = "0.1.0"

__all__ = [
    "Account",
    "BagWriter",
    "ChainState",
    "ConfigError",
    "Digest",
    "FormatError",
    "Ledger",
    "LedgerBinding",
    "LedgerError",
    "MessageRecord",
    "SamplingPolicy",
    "TraceboxError",
    "VerificationReport",
    "create_account",
    "init_chain",
    "open_bag",
    "random_seed",
    "read_bag",
    "verify_bag",
    "__version__",
]
