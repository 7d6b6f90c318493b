"""Command-line pipeline driver.

Each subcommand is a thin client of the pipeline service: it reads local
files, posts one request (in-process by default, or to --server-url), and
writes the response to local files. Every output embeds a provenance line
with the stage's config digest and the SHA-256 of each input file.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from pathlib import Path

import httpx

from .config import PipelineConfig, load_config
from .util import SenseforgeError, config_digest, sha256_hex
from . import jsonlio

STAGE_TIMEOUT = 600.0


class CliError(SenseforgeError):
    def __init__(self, payload: dict, exit_code: int = 2):
        super().__init__(payload.get("error", "request failed"))
        self.payload = payload
        self.exit_code = exit_code


class ServiceClient:
    """HTTP client for the pipeline service; in-process ASGI when no URL is set."""

    def __init__(self, server_url: str | None = None):
        self.server_url = server_url
        self._app = None

    def _get_app(self):
        if self._app is None:
            from .service import create_app

            self._app = create_app()
        return self._app

    async def _post_inprocess(self, path: str, payload: dict) -> httpx.Response:
        transport = httpx.ASGITransport(app=self._get_app())
        async with httpx.AsyncClient(transport=transport, base_url="http://senseforge.local",
                                     timeout=STAGE_TIMEOUT) as client:
            return await client.post(path, json=payload)

    def post(self, path: str, payload: dict) -> dict:
        if self.server_url:
            with httpx.Client(base_url=self.server_url, timeout=STAGE_TIMEOUT) as client:
                resp = client.post(path, json=payload)
        else:
            resp = asyncio.run(self._post_inprocess(path, payload))
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"error": resp.text}
            raise CliError(body, exit_code=2 if resp.status_code == 400 else 1)
        return resp.json()


def _read_file(path) -> tuple[bytes, str]:
    data = Path(path).read_bytes()
    return data, sha256_hex(data)


def _read_records(path) -> tuple[list[dict], str]:
    _, digest = _read_file(path)
    records, _ = jsonlio.read_jsonl(path)
    return records, digest


def _meta(stage: str, settings: dict, inputs: dict[str, str]) -> dict:
    return {"stage": stage, "config_digest": config_digest(settings), "inputs": inputs}


def _load_cfg(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _policy_payload(cfg: PipelineConfig, args) -> dict:
    kind = getattr(args, "policy", None) or cfg.policy.kind
    return {"kind": kind, "min_stem_length": cfg.policy.min_stem_length,
            "case_sensitive": cfg.policy.case_sensitive}


def _scorer_payload(cfg: PipelineConfig, args) -> dict:
    kind = getattr(args, "scorer", None) or cfg.scorer.kind
    url = getattr(args, "scorer_url", None) or cfg.scorer.url
    seed = getattr(args, "scorer_seed", None)
    return {
        "kind": kind,
        "url": url,
        "seed": cfg.scorer.seed if seed is None else seed,
        "batch_size": cfg.scorer.batch_size,
    }


# --- subcommand handlers ---

def cmd_parse(args) -> int:
    raw, digest = _read_file(args.infile)
    fmt = args.format
    if fmt == "auto":
        fmt = "jsonl" if str(args.infile).endswith(".jsonl") else "sskj"
    payload = {
        "strict": args.strict,
        "multisense_only": args.multisense_only,
        "restrict_lemmas": None,
    }
    if args.lemmas:
        lemma_text, _ = _read_file(args.lemmas)
        payload["restrict_lemmas"] = [l.strip() for l in lemma_text.decode("utf-8").splitlines()
                                      if l.strip()]
    if fmt == "sskj":
        payload["text"] = raw.decode("utf-8")
    else:
        payload["entries"] = jsonlio.read_jsonl(args.infile)[0]
    resp = client(args).post("/v1/dictionary/parse", payload)
    settings = {k: payload[k] for k in ("strict", "multisense_only", "restrict_lemmas")}
    jsonlio.write_jsonl(args.out, resp["entries"],
                        _meta("parse", settings, {"dictionary": digest}))
    if resp["issues"]:
        print(json.dumps({"issues": resp["issues"]}, ensure_ascii=False), file=sys.stderr)
    print(f"parse: {len(resp['entries'])} entries -> {args.out}")
    return 0


def cmd_expand(args) -> int:
    cfg = _load_cfg(args)
    records, digest = _read_records(args.infile)
    e = cfg.expansion
    settings = {
        "backend": args.backend or e.backend,
        "endpoint": e.endpoint,
        "api_key_env": e.api_key_env,
        "model_id": args.model or e.model_id,
        "temperature": e.temperature if args.temperature is None else args.temperature,
        "max_tokens": e.max_tokens,
        "n_generations": args.n or e.n_generations,
        "prompt_template": args.prompt_template or e.prompt_template,
        "retries": e.retries,
        "max_workers": e.max_workers,
    }
    # resolved client-side: in-process runs share the CLI's filesystem, and a
    # remote server must not interpret the path against its own cwd
    cache_dir = Path(args.cache_dir or cfg.paths.cache_dir).resolve()
    payload = {
        "entries": records,
        "mode": args.mode,
        "settings": settings,
        "policy": _policy_payload(cfg, args),
        "cache_path": str(cache_dir / "expansion-cache.jsonl"),
    }
    resp = client(args).post("/v1/expand", payload)
    meta_settings = {**settings, "mode": args.mode, "policy": payload["policy"],
                     "dedup_normalization": resp["dedup_normalization"]}
    meta_settings.pop("api_key_env")
    jsonlio.write_jsonl(args.out, resp["generations"],
                        _meta("expand", meta_settings, {"entries": digest}))
    print(f"expand: {len(resp['generations'])} generations ({resp['kept']} kept) -> {args.out}")
    return 0


def cmd_forge_wsd(args) -> int:
    cfg = _load_cfg(args)
    records, digest = _read_records(args.infile)
    payload = {
        "generations": records,
        "inventory_id": args.inventory_id,
        "policy": _policy_payload(cfg, args),
        "source": args.source,
        "cap": args.cap,
    }
    resp = client(args).post("/v1/forge/wsd", payload)
    settings = {k: payload[k] for k in ("inventory_id", "policy", "source", "cap")}
    jsonlio.write_jsonl(args.out, resp["examples"],
                        _meta("forge-wsd", settings, {"generations": digest}))
    inventory_out = args.inventory_out or str(Path(args.out).with_suffix(".inventory.json"))
    jsonlio.write_json(inventory_out, resp["inventory"])
    print(f"forge-wsd: {len(resp['examples'])} examples -> {args.out}; "
          f"inventory -> {inventory_out}")
    return 0


def cmd_forge_wic(args) -> int:
    cfg = _load_cfg(args)
    records, digest = _read_records(args.infile)
    forge_cfg = {
        "partners_per_anchor": args.partners or cfg.forge.partners_per_anchor,
        "max_pairs_per_sense": args.max_pairs_per_sense or cfg.forge.max_pairs_per_sense,
        "max_examples_per_sense": args.max_examples_per_sense or cfg.forge.max_examples_per_sense,
        "seed": cfg.forge.seed if args.seed is None else args.seed,
    }
    payload = {"examples": records, "config": forge_cfg, "dataset_id": args.dataset_id}
    resp = client(args).post("/v1/forge/wic", payload)
    meta = _meta("forge-wic", {**forge_cfg, "dataset_id": args.dataset_id}, {"examples": digest})
    meta["stats"] = resp["stats"]
    jsonlio.write_jsonl(args.out, resp["pairs"], meta)
    print(f"forge-wic: {resp['stats']['pairs']} pairs "
          f"({resp['stats']['distinct_sentences']} distinct sentences) -> {args.out}")
    return 0


def cmd_merge_wic(args) -> int:
    if len(args.infiles) != len(args.ids):
        raise CliError({"error": "--in and --ids need the same count"})
    datasets, inputs = [], {}
    for ds_id, path in zip(args.ids, args.infiles):
        records, digest = _read_records(path)
        datasets.append({"id": ds_id, "pairs": records})
        inputs[ds_id] = digest
    resp = client(args).post("/v1/forge/merge", {"datasets": datasets})
    jsonlio.write_jsonl(args.out, resp["pairs"], _meta("merge-wic", {"ids": args.ids}, inputs))
    print(f"merge-wic: {len(resp['pairs'])} pairs -> {args.out}")
    return 0


def cmd_import_wsd(args) -> int:
    cfg = _load_cfg(args)
    records, digest = _read_records(args.infile)
    payload = {"records": records, "inventory_id": args.inventory_id,
               "policy": _policy_payload(cfg, args)}
    resp = client(args).post("/v1/import/wsd", payload)
    settings = {"inventory_id": args.inventory_id, "policy": payload["policy"]}
    jsonlio.write_jsonl(args.out, resp["examples"],
                        _meta("import-wsd", settings, {"records": digest}))
    inventory_out = args.inventory_out or str(Path(args.out).with_suffix(".inventory.json"))
    jsonlio.write_json(inventory_out, resp["inventory"])
    if resp["rejected"]:
        print(json.dumps({"rejected": resp["rejected"]}, ensure_ascii=False), file=sys.stderr)
    print(f"import-wsd: {len(resp['examples'])} accepted, "
          f"{len(resp['rejected'])} rejected -> {args.out}")
    return 0


def cmd_split(args) -> int:
    cfg = _load_cfg(args)
    sskj, sskj_digest = _read_records(args.sskj)
    elexis, elexis_digest = _read_records(args.elexis)
    payload = {
        "split_type": args.type,
        "sskj": sskj,
        "elexis": elexis,
        "seed": cfg.split_seed if args.seed is None else args.seed,
        "validation_fraction": args.validation_fraction,
        "validation_seed": args.validation_seed,
        "lemma_disjoint_validation": args.lemma_disjoint_validation,
    }
    resp = client(args).post("/v1/split", payload)
    settings = {k: payload[k] for k in ("split_type", "seed", "validation_fraction",
                                        "validation_seed", "lemma_disjoint_validation")}
    out = dict(resp)
    out["meta"] = _meta("split", settings, {"sskj": sskj_digest, "elexis": elexis_digest})
    jsonlio.write_json(args.out, out)
    print(f"split: {args.type} train={len(resp['train'])} "
          f"validation={len(resp['validation'])} test={len(resp['test'])} -> {args.out}")
    return 0


def _resolve(args, mode: str) -> int:
    cfg = _load_cfg(args)
    targets, targets_digest = _read_records(args.targets)
    support, support_digest = _read_records(args.support)
    inputs = {"targets": targets_digest, "support": support_digest}
    payload = {
        "mode": mode,
        "targets": targets,
        "support": support,
        "scorer": _scorer_payload(cfg, args),
        "aggregation": args.aggregation or "max",
    }
    if mode == "wsi":
        multiplier = (cfg.threshold.multiplier if args.threshold_multiplier is None
                      else args.threshold_multiplier)
        if args.validation_pairs:
            val_pairs, val_digest = _read_records(args.validation_pairs)
            inputs["validation_pairs"] = val_digest
            calibration = {"validation_pairs": val_pairs, "c_grid": None}
            if args.calibration_targets and args.calibration_support:
                cal_targets, d1 = _read_records(args.calibration_targets)
                cal_support, d2 = _read_records(args.calibration_support)
                inputs["calibration_targets"], inputs["calibration_support"] = d1, d2
                calibration["wsi_targets"] = cal_targets
                calibration["wsi_support"] = cal_support
            else:
                calibration["c_grid"] = [multiplier]
            payload["calibration"] = calibration
        elif args.validation_mean is not None:
            payload["threshold"] = {"multiplier": multiplier,
                                    "validation_mean": args.validation_mean}
        else:
            raise CliError({"error": "resolve-wsi needs --validation-pairs or --validation-mean"})
    resp = client(args).post("/v1/resolve", payload)
    settings = {"mode": mode, "scorer": payload["scorer"], "aggregation": payload["aggregation"],
                "threshold": resp.get("threshold")}
    meta = _meta(f"resolve-{mode}", settings, inputs)
    meta["skipped"] = resp["skipped"]
    if resp.get("threshold"):
        meta["threshold"] = resp["threshold"]
    jsonlio.write_jsonl(args.out, resp["resolutions"], meta)
    print(f"resolve-{mode}: {len(resp['resolutions'])} resolutions "
          f"({len(resp['skipped'])} skipped) -> {args.out}")
    return 0


def cmd_resolve_wsd(args) -> int:
    return _resolve(args, "wsd")


def cmd_resolve_wsi(args) -> int:
    return _resolve(args, "wsi")


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    inputs: dict[str, str] = {}
    payload = {"task": args.task, "split_type": args.split_type,
               "dataset_desc": args.dataset_desc, "config_digest": cfg.digest()}
    if args.task == "wic":
        pairs, inputs["pairs"] = _read_records(args.pairs)
        wic = {"pairs": pairs, "decision_threshold": args.decision_threshold}
        if args.predictions:
            records, inputs["predictions"] = _read_records(args.predictions)
            wic["predictions"] = {r["id"]: int(r["label"]) for r in records}
        else:
            wic["scorer"] = _scorer_payload(cfg, args)
        payload["wic"] = wic
    elif args.task == "wsd":
        resolutions, inputs["resolutions"] = _read_records(args.resolutions)
        gold, inputs["gold"] = _read_records(args.gold)
        train, inputs["train"] = _read_records(args.train)
        payload["wsd"] = {"resolutions": resolutions, "gold": gold, "train": train}
    else:
        resolutions, inputs["resolutions"] = _read_records(args.resolutions)
        gold, inputs["gold"] = _read_records(args.gold)
        _, inputs["inventory"] = _read_file(args.inventory)
        payload["wsi"] = {"resolutions": resolutions, "gold": gold,
                          "inventory": jsonlio.read_json(args.inventory)}
    resp = client(args).post("/v1/eval", payload)
    out = dict(resp)
    out["meta"] = _meta("eval", {"task": args.task, "split_type": args.split_type}, inputs)
    jsonlio.write_json(args.out, out)
    print(f"eval {args.task}/{args.split_type or '-'}: CA={resp['accuracy']:.3f} "
          f"(baseline {resp['baseline']:.3f}, n={resp['n']}) -> {args.out}")
    return 0


def cmd_report(args) -> int:
    reports, inputs = [], {}
    for path in args.reports:
        obj = jsonlio.read_json(path)
        obj.pop("meta", None)
        reports.append(obj)
        inputs[Path(path).name] = _read_file(path)[1]
    resp = client(args).post("/v1/report", {"reports": reports})
    Path(args.out_csv).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out_csv).write_text(resp["csv"], encoding="utf-8")
    if args.out_table:
        Path(args.out_table).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out_table).write_text(resp["table"], encoding="utf-8")
    print(resp["table"], end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


def client(args) -> ServiceClient:
    return ServiceClient(args.server_url)


def _add_common(sp):
    sp.add_argument("--config", help="pipeline config file (YAML or JSON)")
    sp.add_argument("--server-url", help="remote service URL (default: run in-process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senseforge",
        description="Dictionary-to-WiC forging and WiC-based WSD/WSI pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a dictionary into entry records")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["auto", "sskj", "jsonl"], default="auto")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--multisense-only", action="store_true")
    p.add_argument("--lemmas", help="allowlist file, one lemma per line")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("expand", help="expand snippets into full sentences")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--backend", choices=["http", "template"])
    p.add_argument("--cache-dir")
    p.add_argument("--mode", choices=["core-only", "core+special"], default="core-only")
    p.add_argument("--n", type=int, help="generations per snippet")
    p.add_argument("--model")
    p.add_argument("--temperature", type=float)
    p.add_argument("--prompt-template")
    p.add_argument("--policy", choices=["exact-token", "stem-prefix", "external-lemmatizer"])
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("forge-wsd", help="build a sense-labeled dataset from kept generations")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inventory-out")
    p.add_argument("--inventory-id", default="sskj")
    p.add_argument("--cap", type=int, help="max examples per sense")
    p.add_argument("--source", default="generated")
    p.add_argument("--policy", choices=["exact-token", "stem-prefix", "external-lemmatizer"])
    p.set_defaults(func=cmd_forge_wsd)

    p = sub.add_parser("forge-wic", help="forge a balanced WiC pair dataset")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--dataset-id", default="wic")
    p.add_argument("--partners", type=int)
    p.add_argument("--max-pairs-per-sense", type=int)
    p.add_argument("--max-examples-per-sense", type=int)
    p.set_defaults(func=cmd_forge_wic)

    p = sub.add_parser("merge-wic", help="merge WiC datasets with source-prefixed ids")
    _add_common(p)
    p.add_argument("--in", dest="infiles", nargs="+", required=True)
    p.add_argument("--ids", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge_wic)

    p = sub.add_parser("import-wsd", help="validate and import external WSD records")
    _add_common(p)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inventory-out")
    p.add_argument("--inventory-id", required=True)
    p.add_argument("--policy", choices=["exact-token", "stem-prefix", "external-lemmatizer"])
    p.set_defaults(func=cmd_import_wsd)

    p = sub.add_parser("split", help="build an OOV split manifest")
    _add_common(p)
    p.add_argument("--type", required=True, choices=["pure-oov", "partial-oov", "non-oov"])
    p.add_argument("--sskj", required=True)
    p.add_argument("--elexis", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--validation-fraction", type=float)
    p.add_argument("--validation-seed", type=int)
    p.add_argument("--lemma-disjoint-validation", action="store_true")
    p.set_defaults(func=cmd_split)

    for name, func in (("resolve-wsd", cmd_resolve_wsd), ("resolve-wsi", cmd_resolve_wsi)):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} via a WiC scorer")
        _add_common(p)
        p.add_argument("--targets", required=True)
        p.add_argument("--support", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--scorer", choices=["oracle", "random", "overlap", "remote"])
        p.add_argument("--scorer-url")
        p.add_argument("--scorer-seed", type=int)
        p.add_argument("--aggregation", choices=["max", "mean"])
        if name == "resolve-wsi":
            p.add_argument("--threshold-multiplier", type=float)
            p.add_argument("--validation-mean", type=float)
            p.add_argument("--validation-pairs")
            p.add_argument("--calibration-targets")
            p.add_argument("--calibration-support")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score predictions against gold data")
    _add_common(p)
    p.add_argument("--task", required=True, choices=["wic", "wsd", "wsi"])
    p.add_argument("--out", required=True)
    p.add_argument("--split-type", default="")
    p.add_argument("--dataset-desc", default="")
    p.add_argument("--pairs")
    p.add_argument("--predictions")
    p.add_argument("--decision-threshold", type=float, default=0.5)
    p.add_argument("--scorer", choices=["oracle", "random", "overlap", "remote"])
    p.add_argument("--scorer-url")
    p.add_argument("--scorer-seed", type=int)
    p.add_argument("--resolutions")
    p.add_argument("--gold")
    p.add_argument("--train")
    p.add_argument("--inventory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render eval reports as a table and CSV")
    _add_common(p)
    p.add_argument("--reports", nargs="+", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-table")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="run the pipeline service")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8570)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(json.dumps(exc.payload, ensure_ascii=False), file=sys.stderr)
        return exc.exit_code
    except SenseforgeError as exc:
        print(json.dumps({"error": str(exc)}, ensure_ascii=False), file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(json.dumps({"error": f"service unreachable: {exc}"}, ensure_ascii=False),
              file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}, ensure_ascii=False),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
