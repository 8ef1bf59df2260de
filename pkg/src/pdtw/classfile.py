"""Class-file serialization of discovered pairs, plus the LR sidecar."""

from __future__ import annotations

from typing import Container, Sequence

from .errors import MalformedLine, UnknownFile
from .evaluation import Fragment
from .stage2 import DiscoveredPair


def format_pairs(pairs: Sequence[DiscoveredPair]) -> str:
    blocks = []
    for n, p in enumerate(pairs, 1):
        blocks.append(f"Class {n}\n"
                      f"{p.file_a} {p.onset_a:.3f} {p.offset_a:.3f}\n"
                      f"{p.file_b} {p.onset_b:.3f} {p.offset_b:.3f}\n")
    return "\n".join(blocks)


def format_sidecar(pairs: Sequence[DiscoveredPair]) -> str:
    lines = ["class\tlr_score\tpath_length\n"]
    lines += [f"{n}\t{p.lr_score:.6f}\t{p.path_length}\n" for n, p in enumerate(pairs, 1)]
    return "".join(lines)


def write_pairs(pairs: Sequence[DiscoveredPair], path, sidecar_path=None) -> None:
    with open(path, "w") as fh:
        fh.write(format_pairs(pairs))
    if sidecar_path is not None:
        with open(sidecar_path, "w") as fh:
            fh.write(format_sidecar(pairs))


def read_pairs(path, known_files: Container[str] | None = None) -> list[tuple[Fragment, Fragment]]:
    """Parse a class file into fragment pairs.

    Classes with more than two members are expanded into all member pairs.
    """
    classes: list[list[Fragment]] = []
    current: list[Fragment] | None = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text:
                current = None
                continue
            if text.startswith("Class"):
                current = []
                classes.append(current)
                continue
            if current is None:
                raise MalformedLine("fragment line outside a Class block", lineno, path)
            parts = text.split()
            if len(parts) != 3:
                raise MalformedLine("expected '<file_id> <onset_s> <offset_s>'", lineno, path)
            try:
                onset, offset = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise MalformedLine(str(exc), lineno, path) from exc
            if not offset > onset:
                raise MalformedLine("offset must exceed onset", lineno, path)
            if known_files is not None and parts[0] not in known_files:
                raise UnknownFile(f"{path}:{lineno}: unknown file id {parts[0]!r}")
            current.append(Fragment(parts[0], onset, offset))
    pairs = []
    for members in classes:
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                pairs.append((members[i], members[j]))
    return pairs
