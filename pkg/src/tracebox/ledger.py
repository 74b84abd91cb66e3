"""Embedded simulated blockchain with a proof-of-existence contract.

Reproduces the semantics the recorder needs from a real chain without any
networking: ECDSA-signed transactions carrying digest payloads, auto-mined
blocks (one block per accepted transaction), owner-only proof writes, and
public digest-to-block-number lookup. Blocks are linked by header hashes so
retroactive edits to a persisted ledger are detectable.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import FormatError, LedgerError
from .hashchain import Digest

_CURVE = ec.SECP256K1()
_CURVE_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141

ZERO_DIGEST = Digest(bytes(32))

DEFAULT_TX_CAPACITY = 1024


class NotOwner(LedgerError):
    """Transaction sender is not the contract owner."""


class BadSignature(LedgerError):
    """Transaction signature does not verify against its sender."""


class PayloadTooLarge(LedgerError):
    """Transaction payload exceeds the configured capacity."""


class EmptyPayload(LedgerError):
    """Transaction payload contains no digests."""


class StaleNonce(LedgerError):
    """Transaction nonce does not match the sender's accepted-transaction count."""


class UnknownContract(LedgerError):
    """No contract deployed under the given id."""


class BlockNotFound(LedgerError):
    """Requested block number is outside the chain."""


def _address_from_public_key(public_key: ec.EllipticCurvePublicKey) -> str:
    point = public_key.public_bytes(Encoding.X962, PublicFormat.UncompressedPoint)
    return "0x" + hashlib.sha256(point[1:]).digest()[-20:].hex()


@dataclass(frozen=True)
class Account:
    """A signing identity: secp256k1 private key plus its derived address."""

    private_key: ec.EllipticCurvePrivateKey
    address: str

    def sign(self, message: bytes) -> bytes:
        return self.private_key.sign(message, ec.ECDSA(hashes.SHA256()))

    def public_key_bytes(self) -> bytes:
        return self.private_key.public_key().public_bytes(
            Encoding.X962, PublicFormat.UncompressedPoint
        )


def create_account(seed: bytes | None = None) -> Account:
    """New account; deterministic when seeded, random otherwise."""
    if seed is None:
        key = ec.generate_private_key(_CURVE)
    else:
        scalar = int.from_bytes(hashlib.sha256(seed).digest(), "big") % (_CURVE_ORDER - 1) + 1
        key = ec.derive_private_key(scalar, _CURVE)
    return Account(private_key=key, address=_address_from_public_key(key.public_key()))


@dataclass(frozen=True)
class SignedTransaction:
    """Digest payload signed by its sender over the concatenated payload bytes."""

    payload: tuple[Digest, ...]
    signature: bytes
    sender: str
    nonce: int
    public_key: bytes
    contract: str

    def signed_message(self) -> bytes:
        return b"".join(self.payload)

    def tx_hash(self) -> Digest:
        h = hashlib.sha256()
        h.update(self.contract.encode("ascii"))
        h.update(self.sender.encode("ascii"))
        h.update(self.nonce.to_bytes(8, "big"))
        h.update(self.public_key)
        h.update(self.signature)
        h.update(self.signed_message())
        return Digest(h.digest())


@dataclass(frozen=True)
class Block:
    """One mined block; prev_hash links to the previous block's header hash."""

    number: int
    prev_hash: Digest
    transactions: tuple[SignedTransaction, ...]
    timestamp_ns: int

    def header_hash(self) -> Digest:
        h = hashlib.sha256()
        h.update(self.number.to_bytes(8, "big"))
        h.update(self.prev_hash)
        tx_root = hashlib.sha256(b"".join(tx.tx_hash() for tx in self.transactions)).digest()
        h.update(tx_root)
        h.update(self.timestamp_ns.to_bytes(8, "big"))
        return Digest(h.digest())


@dataclass
class ProofContract:
    """Owner-only digest store: digest -> number of the block that recorded it."""

    contract_id: str
    owner: str
    proofs: dict[Digest, int] = field(default_factory=dict)


@dataclass(frozen=True)
class TxReceipt:
    block_number: int
    tx_index: int


class Ledger:
    """Single-writer simulated chain; queries never change state."""

    def __init__(self, tx_capacity: int = DEFAULT_TX_CAPACITY, persist_path: str | Path | None = None):
        if tx_capacity < 1:
            raise LedgerError(f"tx capacity must be >= 1, got {tx_capacity}")
        self.tx_capacity = tx_capacity
        self.persist_path = Path(persist_path) if persist_path is not None else None
        self.blocks: list[Block] = []
        self.contracts: dict[str, ProofContract] = {}
        self._nonces: dict[str, int] = {}

    @property
    def height(self) -> int:
        return len(self.blocks)

    def deploy_contract(self, owner: Account) -> str:
        material = owner.address.encode("ascii") + len(self.contracts).to_bytes(4, "big")
        contract_id = "0x" + hashlib.sha256(b"contract:" + material).digest()[-20:].hex()
        self.contracts[contract_id] = ProofContract(contract_id=contract_id, owner=owner.address)
        self._persist_line({"type": "contract", "id": contract_id, "owner": owner.address})
        return contract_id

    def build_transaction(
        self, contract_id: str, sender: Account, payload: list[Digest]
    ) -> SignedTransaction:
        message = b"".join(payload)
        return SignedTransaction(
            payload=tuple(payload),
            signature=sender.sign(message),
            sender=sender.address,
            nonce=self._nonces.get(sender.address, 0),
            public_key=sender.public_key_bytes(),
            contract=contract_id,
        )

    def submit_proofs(self, contract_id: str, sender: Account, payload: list[Digest]) -> TxReceipt:
        """Sign, validate, and mine one transaction mapping every digest to its block."""
        return self.submit_signed(self.build_transaction(contract_id, sender, payload))

    def submit_signed(self, tx: SignedTransaction) -> TxReceipt:
        contract = self._contract(tx.contract)
        if not tx.payload:
            raise EmptyPayload("transaction payload is empty")
        if len(tx.payload) > self.tx_capacity:
            raise PayloadTooLarge(
                f"payload of {len(tx.payload)} digests exceeds capacity {self.tx_capacity}"
            )
        self._check_signature(tx)
        if tx.sender != contract.owner:
            raise NotOwner(f"sender {tx.sender} is not the owner of contract {tx.contract}")
        if tx.nonce != self._nonces.get(tx.sender, 0):
            raise StaleNonce(
                f"nonce {tx.nonce} does not match expected {self._nonces.get(tx.sender, 0)}"
            )

        block = Block(
            number=self.height + 1,
            prev_hash=self.blocks[-1].header_hash() if self.blocks else ZERO_DIGEST,
            transactions=(tx,),
            timestamp_ns=time.time_ns(),
        )
        self.blocks.append(block)
        self._nonces[tx.sender] = tx.nonce + 1
        for digest in tx.payload:
            contract.proofs.setdefault(digest, block.number)
        self._persist_line(_block_to_dict(block))
        return TxReceipt(block_number=block.number, tx_index=0)

    def query_proof(self, contract_id: str, digest: Digest) -> int:
        """Block number that recorded the digest, or 0 if never stored."""
        return self._contract(contract_id).proofs.get(digest, 0)

    def get_block(self, number: int) -> Block:
        if not 1 <= number <= self.height:
            raise BlockNotFound(f"block {number} not in chain of height {self.height}")
        return self.blocks[number - 1]

    def verify_blocks(self) -> bool:
        """Recompute the header-hash linkage over the whole chain."""
        prev = ZERO_DIGEST
        for i, block in enumerate(self.blocks, start=1):
            if block.number != i or block.prev_hash != prev:
                return False
            prev = block.header_hash()
        return True

    def save(self, path: str | Path) -> None:
        lines = [
            json.dumps({"type": "contract", "id": c.contract_id, "owner": c.owner},
                       separators=(",", ":"))
            for c in self.contracts.values()
        ]
        lines += [json.dumps(_block_to_dict(b), separators=(",", ":")) for b in self.blocks]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, tx_capacity: int = DEFAULT_TX_CAPACITY) -> "Ledger":
        ledger = cls(tx_capacity=tx_capacity)
        text = Path(path).read_text(encoding="utf-8")
        for line_number, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"bad ledger line: {exc}", line_number) from exc
            if obj.get("type") == "contract":
                ledger.contracts[obj["id"]] = ProofContract(contract_id=obj["id"], owner=obj["owner"])
            elif obj.get("type") == "block":
                block = _block_from_dict(obj, line_number)
                ledger.blocks.append(block)
                for tx in block.transactions:
                    ledger._nonces[tx.sender] = ledger._nonces.get(tx.sender, 0) + 1
            else:
                raise FormatError(f"unknown ledger line type {obj.get('type')!r}", line_number)
        # Replay proofs in block order; setdefault keeps entries write-once.
        for block in ledger.blocks:
            for tx in block.transactions:
                contract = ledger.contracts.get(tx.contract)
                if contract is None:
                    raise FormatError(f"block {block.number} targets unknown contract {tx.contract}")
                for digest in tx.payload:
                    contract.proofs.setdefault(digest, block.number)
        ledger.persist_path = Path(path)
        return ledger

    def _contract(self, contract_id: str) -> ProofContract:
        contract = self.contracts.get(contract_id)
        if contract is None:
            raise UnknownContract(f"no contract at {contract_id}")
        return contract

    def _check_signature(self, tx: SignedTransaction) -> None:
        try:
            public_key = ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, tx.public_key)
        except ValueError as exc:
            raise BadSignature(f"undecodable public key: {exc}") from exc
        if _address_from_public_key(public_key) != tx.sender:
            raise BadSignature("public key does not match the claimed sender address")
        try:
            public_key.verify(tx.signature, tx.signed_message(), ec.ECDSA(hashes.SHA256()))
        except InvalidSignature as exc:
            raise BadSignature("signature does not verify over the payload") from exc

    def _persist_line(self, obj: dict) -> None:
        if self.persist_path is None:
            return
        with self.persist_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def tamper_payload(tx: SignedTransaction, index: int, new_digest: Digest) -> SignedTransaction:
    """Copy of tx with one payload entry replaced; signature left untouched."""
    payload = list(tx.payload)
    payload[index] = new_digest
    return replace(tx, payload=tuple(payload))


def _block_to_dict(block: Block) -> dict:
    return {
        "type": "block",
        "number": block.number,
        "prev_hash": block.prev_hash.hex(),
        "timestamp_ns": block.timestamp_ns,
        "transactions": [
            {
                "contract": tx.contract,
                "sender": tx.sender,
                "nonce": tx.nonce,
                "payload": [d.hex() for d in tx.payload],
                "signature": tx.signature.hex(),
                "public_key": tx.public_key.hex(),
            }
            for tx in block.transactions
        ],
    }


def _block_from_dict(obj: dict, line_number: int) -> Block:
    try:
        transactions = tuple(
            SignedTransaction(
                payload=tuple(Digest.from_hex(d) for d in tx["payload"]),
                signature=bytes.fromhex(tx["signature"]),
                sender=tx["sender"],
                nonce=tx["nonce"],
                public_key=bytes.fromhex(tx["public_key"]),
                contract=tx["contract"],
            )
            for tx in obj["transactions"]
        )
        return Block(
            number=obj["number"],
            prev_hash=Digest.from_hex(obj["prev_hash"]),
            transactions=transactions,
            timestamp_ns=obj["timestamp_ns"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad block line: {exc}", line_number) from exc
