"""Manifest ingestion, analysis orchestration and report emission.

A manifest is a JSON document declaring the working order, a seed, a source
manifold (defining series or graphed equations), optionally a target
manifold and a formal map, and a list of analyses with their bounds.  The
report mirrors the manifest deterministically: same manifest, same bytes.
All numbers are exact: rationals as "p/q" strings, complex coefficients as
[re, im] pairs of such strings.
"""

from __future__ import annotations

import json
from fractions import Fraction

from . import __version__
from .context import VariableContext
from .exprparse import parse_expression
from .gaussian import GaussianRational
from .linalg import generic_rank
from .manifold import (GraphedManifold, Names, RealDefiningSystem,
                       complexify_and_graph, verify_reality)
from .nondegen import (classify_manifold, classify_map_cr,
                       holomorphic_degeneracy_field, psi_and_h_conditions)
from .reflection import (FormalCRMap, reflection_components,
                         reflection_identities, verify_formal_cr_map)
from .segre import chain, minimality
from .series import SeriesMap, TruncatedSeries


class ManifestError(ValueError):
    pass


def _role_aliases(m, d, primed):
    names = Names(m, d, primed)
    suffix = "p" if primed else ""
    out = {}
    for i in range(1, m + d + 1):
        out["t%s%d" % (suffix, i)] = (names.z + names.w)[i - 1]
        out["tau%s%d" % (suffix, i)] = (names.zeta + names.xi)[i - 1]
    if primed:
        # A primed build may reuse expressions written with unprimed names
        # (a target defaulting to the source manifold).
        plain = Names(m, d, False)
        for a, b in zip(plain.t + plain.tau, names.t + names.tau):
            out[a] = b
        for i in range(1, m + d + 1):
            out["t%d" % i] = (names.z + names.w)[i - 1]
            out["tau%d" % i] = (names.zeta + names.xi)[i - 1]
    return out


def build_manifold(spec: dict, order: int, primed: bool) -> GraphedManifold:
    m = spec.get("m")
    d = spec.get("d")
    if m is None or d is None:
        raise ManifestError("manifold spec needs 'm' and 'd'")
    names = Names(m, d, primed)
    aliases = _role_aliases(m, d, primed)
    if "rho" in spec:
        ctx = VariableContext(names.t + names.tau)
        comps = [parse_expression(text, ctx, order, aliases)
                 for text in spec["rho"]]
        system = RealDefiningSystem(m + d, d, SeriesMap(comps))
        split = spec.get("split")
        if split is None:
            split = list(range(m, m + d))
        return complexify_and_graph(system, split=split, primed=primed)
    if "theta_bar" in spec:
        ctx = VariableContext(names.z + names.zeta + names.xi)
        comps = [parse_expression(text, ctx, order, aliases)
                 for text in spec["theta_bar"]]
        return GraphedManifold.from_theta_bar(m, d, SeriesMap(comps),
                                              primed=primed)
    raise ManifestError("manifold spec needs 'rho' or 'theta_bar'")


class Manifest:
    def __init__(self, data: dict):
        self.order = int(data.get("order", 6))
        self.seed = int(data.get("seed", 0))
        if self.order < 0:
            raise ManifestError("order must be non-negative")
        if "source" not in data:
            raise ManifestError("manifest needs a 'source' manifold")
        self.source_spec = data["source"]
        self.target_spec = data.get("target")
        self.map_spec = data.get("map")
        self.analyses = data.get("analyses", [])
        for a in self.analyses:
            if "name" not in a:
                raise ManifestError("every analysis needs a 'name'")
            for key in ("kmax", "Dmax", "Gmax", "betamax", "ell0", "k"):
                if key in a and int(a[key]) > self.order:
                    raise ManifestError(
                        "analysis bound %s=%s exceeds order %d"
                        % (key, a[key], self.order))

    @classmethod
    def load(cls, path: str) -> "Manifest":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(json.load(fh))


# -- serialization helpers -----------------------------------------------------


def _frac_str(q: Fraction) -> str:
    return "%d/%d" % (q.numerator, q.denominator) if q.denominator != 1 \
        else str(q.numerator)


def encode_coeff(c: GaussianRational):
    return [_frac_str(c.re), _frac_str(c.im)]


def encode_series(s: TruncatedSeries):
    terms = []
    for e in sorted(s.terms, key=lambda e: (sum(e), e)):
        terms.append([list(e), encode_coeff(s.terms[e])])
    return {"context": list(s.context.names), "order": s.order,
            "terms": terms, "text": str(s)}


def encode_verdict(v):
    out = {"status": v.status}
    if v.k0 is not None:
        out["k0"] = v.k0
    if v.bound is not None:
        out["bound"] = list(v.bound) if isinstance(v.bound, tuple) else v.bound
    return out


def encode_residuals(rep):
    entries = []
    for (fam, jp, beta), (val, prec) in sorted(
            rep.entries.items(), key=lambda kv: (str(kv[0][0]), kv[0][1:])):
        entries.append({"family": fam, "component": jp, "beta": list(beta),
                        "valuation": val, "precision": prec})
    return {"ok": rep.ok, "entries": entries}


# -- orchestration -------------------------------------------------------------


class AnalysisFailure(Exception):
    def __init__(self, name, cause):
        super().__init__("analysis %r failed: %s" % (name, cause))
        self.name = name
        self.cause = cause


def run(manifest: Manifest) -> dict:
    """Execute the manifest's analyses in dependency order.

    Returns the report dictionary; raises AnalysisFailure when a module
    errors (an inconclusive verdict is not an error).
    """
    order = manifest.order
    report = {
        "provenance": {
            "tool": "crreflect",
            "version": __version__,
            "order": order,
            "seed": manifest.seed,
        },
        "analyses": [],
    }
    M = build_manifold(manifest.source_spec, order, primed=False)
    report["provenance"]["source"] = {"m": M.m, "d": M.d}
    Mp = None
    if manifest.target_spec is not None:
        Mp = build_manifold(manifest.target_spec, order, primed=True)
    elif manifest.map_spec is not None:
        Mp = build_manifold(manifest.source_spec, order, primed=True)
    if Mp is not None:
        report["provenance"]["target"] = {"m": Mp.m, "d": Mp.d}

    hmap = None
    if manifest.map_spec is not None:
        ctx_t = VariableContext(M.names.t)
        aliases = _role_aliases(M.m, M.d, primed=False)
        comps = [parse_expression(text, ctx_t, order, aliases)
                 for text in manifest.map_spec]
        hmap = FormalCRMap(SeriesMap(comps), M, Mp)

    reality = verify_reality(M)
    report["provenance"]["source_reality_ok"] = reality.ok

    for spec in manifest.analyses:
        name = spec["name"]
        try:
            result = _run_one(name, spec, manifest, M, Mp, hmap)
        except AnalysisFailure:
            raise
        except Exception as exc:  # surfaced with the analysis name
            raise AnalysisFailure(name, exc) from exc
        report["analyses"].append({"name": name, "result": result})
    return report


def _need_map(hmap, name):
    if hmap is None:
        raise ManifestError("analysis %r needs a 'map' entry" % name)
    return hmap


def _run_one(name, spec, manifest, M, Mp, hmap):
    order = manifest.order
    seed = manifest.seed
    if name == "verify-cr":
        rep = verify_formal_cr_map(_need_map(hmap, name))
        return encode_residuals(rep)
    if name == "classify-manifold":
        target = Mp if Mp is not None else M
        cls = classify_manifold(target, kmax=spec.get("kmax"),
                                dmax=spec.get("Dmax", 4), seed=seed)
        out = {"nd%d" % (i + 1): encode_verdict(v)
               for i, v in enumerate(cls.chain)}
        if cls.nd5.witness is not None:
            out["nd5"]["witness"] = [encode_series(c)
                                     for c in cls.nd5.witness.components]
        out["chain_consistent"] = cls.chain_consistent()
        return out
    if name == "classify-map":
        cls = classify_map_cr(_need_map(hmap, name),
                              dmax=spec.get("Dmax", 4), seed=seed)
        out = {"cr%d" % (i + 1): encode_verdict(v)
               for i, v in enumerate(cls.cr_chain)}
        if cls.cr5.witness:
            out["cr5"]["witness"] = [encode_series(r) for r in cls.cr5.witness]
        out["chain_consistent"] = cls.cr_chain_consistent()
        return out
    if name == "psi-conditions":
        cls = psi_and_h_conditions(_need_map(hmap, name),
                                   kmax=spec.get("kmax", 2), seed=seed)
        out = {"h%d" % (i + 1): encode_verdict(v)
               for i, v in enumerate([cls.h1, cls.h2, cls.h3, cls.h4])}
        out["ell0"] = cls.ell0
        return out
    if name == "minimality":
        rep = minimality(M, kmax=spec.get("kmax"), seed=seed)
        return {
            "minimal": rep.minimal,
            "nu0": rep.nu0,
            "ranks": {str(k): list(v) for k, v in sorted(rep.ranks.items())},
            "mu0_witness": None if rep.mu0_witness is None
            else [encode_coeff(x) for x in rep.mu0_witness],
            "kmax": rep.kmax,
            "conclusive": rep.conclusive,
            "order": rep.order,
        }
    if name == "reflection":
        h = _need_map(hmap, name)
        gmax = spec.get("Gmax", min(order, 4))
        comps = reflection_components(h, gmax=gmax)
        beta_max = spec.get("betamax", 2)
        idents = reflection_identities(h, beta_max=beta_max)
        table = []
        for gamma in comps.nonzero_gammas():
            table.append({"gamma": list(gamma),
                          "series": [encode_series(s)
                                     for s in comps.table[gamma]]})
        return {
            "components": table,
            "reassembly_defect": comps.reassembly_defect(),
            "identities": encode_residuals(idents),
        }
    if name == "degeneracy-field":
        target = Mp if Mp is not None else M
        field = holomorphic_degeneracy_field(target, spec.get("Dmax", 4))
        if field is None:
            return {"found": False, "Dmax": spec.get("Dmax", 4)}
        return {"found": True,
                "coefficients": [encode_series(c) for c in field.components]}
    if name == "chains":
        k = spec.get("k", 2)
        out = {}
        for side in ("barred", "unbarred"):
            g = chain(M, k, side)
            out[side] = {
                "components": [encode_series(c) for c in g.components],
                "generic_rank": generic_rank(g.components, seed=seed),
                "on_manifold_defect": g.on_manifold_defect(),
            }
        return out
    raise ManifestError("unknown analysis %r" % name)


def render_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def summarize(report: dict) -> str:
    lines = []
    prov = report["provenance"]
    lines.append("crreflect %s  order=%d seed=%d"
                 % (prov["version"], prov["order"], prov["seed"]))
    for item in report["analyses"]:
        name, result = item["name"], item["result"]
        if name == "verify-cr":
            lines.append("verify-cr: %s" % ("pass" if result["ok"] else "FAIL"))
        elif name == "classify-manifold":
            flags = ", ".join("nd%d=%s" % (i, result["nd%d" % i]["status"])
                              for i in range(1, 6))
            lines.append("classify-manifold: " + flags)
        elif name == "classify-map":
            flags = ", ".join("cr%d=%s" % (i, result["cr%d" % i]["status"])
                              for i in range(1, 6))
            lines.append("classify-map: " + flags)
        elif name == "psi-conditions":
            flags = ", ".join("h%d=%s" % (i, result["h%d" % i]["status"])
                              for i in range(1, 5))
            lines.append("psi-conditions: %s, ell0=%s" % (flags, result["ell0"]))
        elif name == "minimality":
            lines.append("minimality: %s (nu0=%s)"
                         % ("minimal" if result["minimal"] else "not minimal",
                            result["nu0"]))
        elif name == "reflection":
            ok = result["identities"]["ok"]
            lines.append("reflection: %d nonzero components, identities %s"
                         % (len(result["components"]),
                            "pass" if ok else "FAIL"))
        elif name == "degeneracy-field":
            lines.append("degeneracy-field: %s"
                         % ("found" if result["found"] else "none"))
        elif name == "chains":
            lines.append("chains: ranks %s / %s"
                         % (result["barred"]["generic_rank"],
                            result["unbarred"]["generic_rank"]))
        else:
            lines.append("%s: done" % name)
    return "\n".join(lines)
