"""Additively homomorphic encryption over packed fixed-point vectors.

Reference backend: Paillier with the g = n + 1 simplification. Real values
are fixed-point encoded into offset-binary slots and many slots are packed
into each plaintext integer, so ciphertext addition sums whole vector
segments at once. Guard bits size the per-slot headroom: with slot width
w = int_bits + frac_bits + guard_bits + 1 and bias 2^(int_bits+frac_bits),
sums of up to 2^guard_bits encodings stay below 2^w and never carry into
the neighbouring slot.

Only addition is supported; that is all secure aggregation needs. The
packing layer talks to the key objects through encrypt_int/decrypt_int/
add_int, so a different additive scheme can be slotted in behind the same
surface.
"""

import math
import random
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import EncodingRangeError, GuardBitError, ParameterError, ProtocolError

try:
    from gmpy2 import powmod as _powmod

    def _pow(base, exp, mod):
        return int(_powmod(base, exp, mod))

except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _pow = pow

WIRE_VERSION = 1

# witnesses per Miller-Rabin test; error probability <= 4^-40
_MR_ROUNDS = 40

_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def _is_probable_prime(n: int, rng: random.Random) -> bool:
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(_MR_ROUNDS):
        a = rng.randrange(2, n - 1)
        x = _pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = _pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits: int, rng: random.Random) -> int:
    while True:
        # top two bits set so p*q has exactly 2*bits bits
        candidate = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        if _is_probable_prime(candidate, rng):
            return candidate


@dataclass(frozen=True)
class PublicKey:
    n: int
    g: int

    @property
    def n_squared(self) -> int:
        return self.n * self.n

    @property
    def modulus_bits(self) -> int:
        return self.n.bit_length()

    def encrypt_int(self, plaintext: int, rng: random.Random) -> int:
        """Randomized Paillier encryption of 0 <= plaintext < n."""
        if not (0 <= plaintext < self.n):
            raise EncodingRangeError("plaintext outside [0, n)")
        n2 = self.n_squared
        r = rng.randrange(1, self.n)
        while math.gcd(r, self.n) != 1:  # only reachable with toy moduli
            r = rng.randrange(1, self.n)
        return (1 + plaintext * self.n) % n2 * _pow(r, self.n, n2) % n2

    def add_int(self, c1: int, c2: int) -> int:
        return c1 * c2 % self.n_squared


@dataclass(frozen=True)
class SecretKey:
    public: PublicKey
    lam: int
    mu: int

    def decrypt_int(self, ciphertext: int) -> int:
        n, n2 = self.public.n, self.public.n_squared
        x = _pow(ciphertext, self.lam, n2)
        return (x - 1) // n * self.mu % n


def keygen(modulus_bits: int = 2048, rng: random.Random | None = None):
    """Fresh Paillier key pair; deterministic for a seeded rng."""
    if modulus_bits < 16:
        raise ParameterError("modulus_bits too small")
    if rng is None:
        rng = random.SystemRandom()
    half = modulus_bits // 2
    while True:
        p = _random_prime(half, rng)
        q = _random_prime(modulus_bits - half, rng)
        if p != q and (p * q).bit_length() == modulus_bits:
            break
    return keypair_from_primes(p, q)


def keypair_from_primes(p: int, q: int):
    """Key pair from given primes; small values support textbook fixtures."""
    n = p * q
    public = PublicKey(n=n, g=n + 1)
    lam = (p - 1) * (q - 1)
    mu = pow(lam, -1, n)
    return public, SecretKey(public=public, lam=lam, mu=mu)


@dataclass(frozen=True)
class FixedPointCodec:
    """Offset-binary fixed-point layout for one slot.

    frac_bits set the quantization step 2^-frac_bits, int_bits the value
    range |v| < 2^int_bits, and guard_bits the number of encodings that may
    be summed (up to 2^guard_bits) without inter-slot carries.
    """

    frac_bits: int = 30
    int_bits: int = 16
    guard_bits: int = 8

    def __post_init__(self):
        if min(self.frac_bits, self.int_bits, self.guard_bits) < 1:
            raise ParameterError("codec bit fields must be >= 1")

    @property
    def slot_width(self) -> int:
        return self.int_bits + self.frac_bits + self.guard_bits + 1

    @property
    def bias(self) -> int:
        return 1 << (self.int_bits + self.frac_bits)

    @property
    def max_summands(self) -> int:
        return 1 << self.guard_bits

    @property
    def quantum(self) -> float:
        return 2.0 ** (-self.frac_bits)

    def slots_per_chunk(self, modulus_bits: int) -> int:
        count = (modulus_bits - 1) // self.slot_width
        if count < 1:
            raise ParameterError(
                f"modulus of {modulus_bits} bits cannot hold a {self.slot_width}-bit slot"
            )
        return count


def encode(values, codec: FixedPointCodec) -> list:
    """Real vector -> offset-binary slot integers."""
    values = np.asarray(values, dtype=np.float64)
    scale = float(1 << codec.frac_bits)
    bias = codec.bias
    slots = []
    for i, v in enumerate(values):
        m = int(round(float(v) * scale))
        if not (-bias <= m < bias):
            raise EncodingRangeError(
                f"value {v!r} at index {i} outside |v| < 2^{codec.int_bits}"
            )
        slots.append(m + bias)
    return slots


def decode(slots, codec: FixedPointCodec, divisor: int = 1) -> np.ndarray:
    """Slot integers -> reals; divisor = number of summed encodings."""
    bias = codec.bias * divisor
    scale = float(1 << codec.frac_bits)
    return np.array([(s - bias) / scale for s in slots], dtype=np.float64)


@dataclass(frozen=True)
class PackedCiphertext:
    """Vector ciphertext: slots packed into Paillier chunk integers.

    add_count tracks homomorphic additions; a fresh encryption has 0, and
    the number of summed contributions is always add_count + 1.
    """

    public: PublicKey
    chunks: tuple
    slot_count: int
    codec: FixedPointCodec
    add_count: int = 0

    @property
    def summands(self) -> int:
        return self.add_count + 1


def encrypt(pk: PublicKey, values, codec: FixedPointCodec, rng: random.Random) -> PackedCiphertext:
    """Encode, pack, and encrypt a real vector."""
    slots = encode(values, codec)
    per_chunk = codec.slots_per_chunk(pk.modulus_bits)
    width = codec.slot_width
    chunks = []
    for start in range(0, len(slots), per_chunk):
        packed = 0
        for j, slot in enumerate(slots[start : start + per_chunk]):
            packed |= slot << (j * width)
        chunks.append(pk.encrypt_int(packed, rng))
    return PackedCiphertext(
        public=pk, chunks=tuple(chunks), slot_count=len(slots), codec=codec
    )


def ct_add(a: PackedCiphertext, b: PackedCiphertext) -> PackedCiphertext:
    """Slot-wise homomorphic sum of two packed ciphertexts."""
    if a.public.n != b.public.n:
        raise ProtocolError("ciphertexts under different public keys")
    if a.codec != b.codec or a.slot_count != b.slot_count:
        raise ProtocolError("ciphertext shapes do not match")
    if a.summands + b.summands > a.codec.max_summands:
        raise GuardBitError(
            f"sum of {a.summands + b.summands} encodings exceeds guard capacity "
            f"2^{a.codec.guard_bits}"
        )
    chunks = tuple(a.public.add_int(x, y) for x, y in zip(a.chunks, b.chunks))
    return replace(a, chunks=chunks, add_count=a.add_count + b.add_count + 1)


def decrypt(sk: SecretKey, ct: PackedCiphertext, divisor: int) -> np.ndarray:
    """Decrypt and decode the slot-wise sum of all added plaintext vectors."""
    if divisor != ct.summands:
        raise ProtocolError(
            f"divisor {divisor} != number of summed contributions {ct.summands}"
        )
    per_chunk = ct.codec.slots_per_chunk(ct.public.modulus_bits)
    width = ct.codec.slot_width
    mask = (1 << width) - 1
    slots = []
    remaining = ct.slot_count
    for chunk in ct.chunks:
        packed = sk.decrypt_int(chunk)
        for _ in range(min(per_chunk, remaining)):
            slots.append(packed & mask)
            packed >>= width
            remaining -= 1
    return decode(slots, ct.codec, divisor=divisor)


def serialize_ciphertext(ct: PackedCiphertext) -> bytes:
    """16-byte header then length-prefixed big-endian chunk integers."""
    head = struct.pack(
        ">BBBBII4x",
        WIRE_VERSION,
        ct.codec.frac_bits,
        ct.codec.int_bits,
        ct.codec.guard_bits,
        ct.slot_count,
        ct.add_count,
    )
    parts = [head, struct.pack(">I", len(ct.chunks))]
    for chunk in ct.chunks:
        blob = chunk.to_bytes((chunk.bit_length() + 7) // 8 or 1, "big")
        parts.append(struct.pack(">I", len(blob)))
        parts.append(blob)
    return b"".join(parts)


def deserialize_ciphertext(blob: bytes, pk: PublicKey) -> PackedCiphertext:
    version, f, w_int, g, slot_count, add_count = struct.unpack_from(">BBBBII4x", blob, 0)
    if version != WIRE_VERSION:
        raise ProtocolError(f"unsupported ciphertext wire version {version}")
    offset = 16
    (n_chunks,) = struct.unpack_from(">I", blob, offset)
    offset += 4
    chunks = []
    for _ in range(n_chunks):
        (length,) = struct.unpack_from(">I", blob, offset)
        offset += 4
        chunks.append(int.from_bytes(blob[offset : offset + length], "big"))
        offset += length
    return PackedCiphertext(
        public=pk,
        chunks=tuple(chunks),
        slot_count=slot_count,
        codec=FixedPointCodec(frac_bits=f, int_bits=w_int, guard_bits=g),
        add_count=add_count,
    )
