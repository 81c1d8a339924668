"""Versioned on-disk formats for pipeline artifacts.

All binary formats are little-endian with a fixed-size header:

  TactileLog  (.tlog)  magic BSTL, u16 version, u16 flags (bit0: quantized),
                       u32 M, u32 T, u16 n_levels, u16 pad, f64 dt, i64 seed,
                       64-byte hex agent fingerprint; then the raw matrix as
                       row-major float32, then (if flagged) the quantized
                       matrix as uint8 with values in {1..N}.
  DistanceMatrix (.dmat) magic BSDM, u16 version, u32 M; float64 M x M.
  BodyMap     (.bmap)  magic BSBM, u16 version, u32 n, u32 d, u32 n_eigs;
                       float64 n x d points, float64 eigenvalues.

Chain dumps are JSON lines: a header object followed by one object per
sample (z run-length encoded, covariance lower triangles, tree edges).
CSV exports exist for debugging and for the plotting scripts.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .bodymap import BodyMap, DistanceMatrix
from .inference import ChainSample, MixtureState, TreeStructure
from .simulate import TactileLog

_TLOG_HDR = struct.Struct("<4sHHIIHHdq64s")
_DMAT_HDR = struct.Struct("<4sHxxI")
_BMAP_HDR = struct.Struct("<4sHxxIII")


class FormatError(ValueError):
    """Artifact file is missing, truncated, or has the wrong magic/version."""


def save_tactile(log: TactileLog, path: str) -> None:
    flags = 1 if log.quantized is not None else 0
    M, T = log.raw.shape
    with open(path, "wb") as fh:
        fh.write(_TLOG_HDR.pack(b"BSTL", 1, flags, M, T, log.n_levels, 0,
                                log.dt, log.seed,
                                log.agent_fingerprint.encode()[:64].ljust(64, b"0")))
        fh.write(np.ascontiguousarray(log.raw, dtype="<f4").tobytes())
        if log.quantized is not None:
            fh.write(np.ascontiguousarray(log.quantized, dtype=np.uint8).tobytes())


def load_tactile(path: str) -> TactileLog:
    with open(path, "rb") as fh:
        hdr = fh.read(_TLOG_HDR.size)
        if len(hdr) < _TLOG_HDR.size:
            raise FormatError(f"{path}: truncated header (expected BSTL v1)")
        magic, version, flags, M, T, n_levels, _, dt, seed, fp = _TLOG_HDR.unpack(hdr)
        if magic != b"BSTL" or version != 1:
            raise FormatError(f"{path}: not a BSTL v1 tactile log")
        buf = fh.read(4 * M * T)
        if len(buf) != 4 * M * T:
            raise FormatError(f"{path}: truncated raw matrix")
        raw = np.frombuffer(buf, dtype="<f4").reshape(M, T)
        quantized = None
        if flags & 1:
            buf = fh.read(M * T)
            if len(buf) != M * T:
                raise FormatError(f"{path}: truncated quantized matrix")
            quantized = np.frombuffer(buf, dtype=np.uint8).reshape(M, T)
    return TactileLog(raw=raw, dt=dt, seed=seed, agent_fingerprint=fp.decode(),
                      quantized=quantized, n_levels=n_levels)


def tactile_to_csv(log: TactileLog, path: str, quantized: bool = False) -> None:
    """Debug export: one row per sensor. Large at full scale."""
    mat = log.quantized if quantized else log.raw
    header = f"# M={mat.shape[0]} T={mat.shape[1]} dt={log.dt} n_levels={log.n_levels}"
    np.savetxt(path, mat, delimiter=",", header=header,
               fmt="%d" if quantized else "%.9g")


def save_distance(dist: DistanceMatrix, path: str) -> None:
    M = dist.n_sensors
    with open(path, "wb") as fh:
        fh.write(_DMAT_HDR.pack(b"BSDM", 1, M))
        fh.write(np.ascontiguousarray(dist.d_matrix, dtype="<f8").tobytes())


def load_distance(path: str) -> DistanceMatrix:
    with open(path, "rb") as fh:
        hdr = fh.read(_DMAT_HDR.size)
        if len(hdr) < _DMAT_HDR.size:
            raise FormatError(f"{path}: truncated header (expected BSDM v1)")
        magic, version, M = _DMAT_HDR.unpack(hdr)
        if magic != b"BSDM" or version != 1:
            raise FormatError(f"{path}: not a BSDM v1 distance matrix")
        buf = fh.read(8 * M * M)
        if len(buf) != 8 * M * M:
            raise FormatError(f"{path}: truncated matrix")
        mat = np.frombuffer(buf, dtype="<f8").reshape(M, M)
    return DistanceMatrix(d_matrix=mat)


def distance_to_csv(dist: DistanceMatrix, path: str) -> None:
    np.savetxt(path, dist.d_matrix, delimiter=",",
               header=f"M={dist.n_sensors}")


def distance_from_csv(path: str) -> DistanceMatrix:
    mat = np.loadtxt(path, delimiter=",", comments="#")
    return DistanceMatrix(d_matrix=np.atleast_2d(mat))


def save_bodymap(bmap: BodyMap, path: str) -> None:
    n, d = bmap.points.shape
    with open(path, "wb") as fh:
        fh.write(_BMAP_HDR.pack(b"BSBM", 1, n, d, bmap.eigen_spectrum.size))
        fh.write(np.ascontiguousarray(bmap.points, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(bmap.eigen_spectrum, dtype="<f8").tobytes())


def load_bodymap(path: str) -> BodyMap:
    with open(path, "rb") as fh:
        hdr = fh.read(_BMAP_HDR.size)
        if len(hdr) < _BMAP_HDR.size:
            raise FormatError(f"{path}: truncated header (expected BSBM v1)")
        magic, version, n, d, n_eigs = _BMAP_HDR.unpack(hdr)
        if magic != b"BSBM" or version != 1:
            raise FormatError(f"{path}: not a BSBM v1 body map")
        buf = fh.read(8 * n * d)
        if len(buf) != 8 * n * d:
            raise FormatError(f"{path}: truncated point matrix")
        pts = np.frombuffer(buf, dtype="<f8").reshape(n, d)
        eigs = np.frombuffer(fh.read(8 * n_eigs), dtype="<f8")
    return BodyMap(points=pts, dim=d, eigen_spectrum=eigs)


def bodymap_to_csv(bmap: BodyMap, path: str) -> None:
    np.savetxt(path, bmap.points, delimiter=",",
               header=f"n={bmap.n_points} d={bmap.dim}")


def _rle(z: np.ndarray) -> list[list[int]]:
    runs = []
    start = 0
    for i in range(1, z.size + 1):
        if i == z.size or z[i] != z[start]:
            runs.append([int(z[start]), i - start])
            start = i
    return runs


def _unrle(runs: list[list[int]]) -> np.ndarray:
    return np.concatenate([np.full(c, v, dtype=np.intp) for v, c in runs])


def _tril(mat: np.ndarray) -> list[float]:
    return mat[np.tril_indices(mat.shape[0])].tolist()


def _untril(vals: list[float], d: int) -> np.ndarray:
    out = np.zeros((d, d))
    out[np.tril_indices(d)] = vals
    return out + np.tril(out, k=-1).T


def save_chain(samples: list[ChainSample], path: str, *, mode: str, seed: int,
               meta: dict | None = None) -> None:
    if not samples:
        raise ValueError("no samples to save")
    k_max, d = samples[0].state.mu.shape
    header = {"format": "bodyschema-chain", "version": 1, "mode": mode,
              "seed": seed, "n": int(samples[0].state.z.size), "d": d,
              "k_max": k_max, "meta": meta or {}}
    with open(path, "w") as fh:
        fh.write(json.dumps(header) + "\n")
        for s in samples:
            st = s.state
            rec = {
                "iteration": s.iteration,
                "log_joint": s.log_joint,
                "z_rle": _rle(st.z),
                "pi": st.pi.tolist(),
                "mu": st.mu.tolist(),
                "sigma_tril": [_tril(st.sigma[k]) for k in range(k_max)],
                "joints": {str(k): v.tolist() for k, v in st.joints.items()},
                "tree": None if st.tree is None else {
                    "root": st.tree.root,
                    "parents": {str(k): p for k, p in st.tree.parents.items()
                                if p is not None},
                    "active": list(st.tree.active),
                },
            }
            fh.write(json.dumps(rec) + "\n")


def load_chain(path: str) -> tuple[dict, list[ChainSample]]:
    with open(path) as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not a bodyschema-chain file") from exc
        if header.get("format") != "bodyschema-chain" or header.get("version") != 1:
            raise FormatError(f"{path}: expected bodyschema-chain v1")
        d, k_max = header["d"], header["k_max"]
        samples = []
        for line in fh:
            rec = json.loads(line)
            sigma = np.stack([_untril(t, d) for t in rec["sigma_tril"]])
            precision = np.stack([np.linalg.inv(s) for s in sigma])
            chol = np.stack([np.linalg.cholesky(0.5 * (s + s.T)) for s in sigma])
            tree = None
            if rec["tree"] is not None:
                parents = {int(k): v for k, v in rec["tree"]["parents"].items()}
                parents[rec["tree"]["root"]] = None
                tree = TreeStructure(parents, tuple(rec["tree"]["active"]))
            state = MixtureState(
                pi=np.array(rec["pi"]), z=_unrle(rec["z_rle"]),
                mu=np.array(rec["mu"]), sigma=sigma, precision=precision,
                chol=chol,
                joints={int(k): np.array(v) for k, v in rec["joints"].items()},
                tree=tree,
            )
            samples.append(ChainSample(iteration=rec["iteration"], state=state,
                                       log_joint=rec["log_joint"]))
    return header, samples
