"""Library scanning: collect public callables with signatures and docs.

Walks the importable module tree rooted at the given import path. Public
means not underscore-prefixed, plus anything explicitly exported through
``__all__``. Submodule attributes that are modules themselves are skipped
as catalog entries (they are traversal edges, not APIs). Output order is
deterministic: sorted by qualified name.
"""

from __future__ import annotations

import importlib
import inspect
import pkgutil
from types import ModuleType


class CatalogError(Exception):
    pass


def _public_names(module: ModuleType) -> list[str]:
    names = {name for name in vars(module) if not name.startswith("_")}
    names.update(getattr(module, "__all__", ()))
    return sorted(names)


def _param_payload(obj) -> list[dict]:
    try:
        signature = inspect.signature(obj)
    except (TypeError, ValueError):
        return []
    return [
        {
            "name": param.name,
            "kind": param.kind.name.lower(),
            "has_default": param.default is not inspect.Parameter.empty,
        }
        for param in signature.parameters.values()
    ]


def _iter_modules(root: ModuleType):
    yield root
    path = getattr(root, "__path__", None)
    if path is None:
        return
    for info in pkgutil.walk_packages(path, prefix=root.__name__ + "."):
        try:
            yield importlib.import_module(info.name)
        except Exception:
            continue  # a broken submodule must not sink the whole scan


def scan_library(library_ref: str) -> list[dict]:
    try:
        root = importlib.import_module(library_ref)
    except Exception as exc:
        raise CatalogError(f"cannot import {library_ref!r}: {exc}") from exc

    records: dict[str, dict] = {}
    for module in _iter_modules(root):
        for name in _public_names(module):
            try:
                obj = getattr(module, name)
            except AttributeError:
                continue
            if isinstance(obj, ModuleType) or not callable(obj):
                continue
            qualified = f"{module.__name__}.{name}"
            records.setdefault(
                qualified,
                {
                    "qualified_name": qualified,
                    "module_path": module.__name__,
                    "params": _param_payload(obj),
                    "doc_text": inspect.getdoc(obj) or "",
                },
            )
    return [records[name] for name in sorted(records)]
