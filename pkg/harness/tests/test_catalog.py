"""Library scanning over the stub package fixture."""

from __future__ import annotations

import pytest

from apiharness.catalog import CatalogError, scan_library


class TestScanLibrary:
    def test_twelve_public_callables(self):
        records = scan_library("stubpkg")
        assert len(records) == 12

    def test_qualified_names_and_module_paths(self):
        records = {r["qualified_name"]: r for r in scan_library("stubpkg")}
        assert "stubpkg.entry" in records
        assert records["stubpkg.alpha.a_one"]["module_path"] == "stubpkg.alpha"

    def test_missing_doc_is_empty(self):
        records = {r["qualified_name"]: r for r in scan_library("stubpkg")}
        assert records["stubpkg.alpha.a_three"]["doc_text"] == ""
        assert records["stubpkg.alpha.a_one"]["doc_text"] == "Increment."

    def test_underscore_excluded_unless_exported(self):
        names = {r["qualified_name"] for r in scan_library("stubpkg")}
        assert "stubpkg.gamma._exported" in names  # explicitly in __all__
        assert "stubpkg.gamma._hidden" not in names

    def test_params_reflect_signature(self):
        records = {r["qualified_name"]: r for r in scan_library("stubpkg")}
        params = records["stubpkg.alpha.a_two"]["params"]
        assert params == [
            {"name": "x", "kind": "positional_or_keyword", "has_default": False},
            {"name": "base", "kind": "positional_or_keyword", "has_default": True},
        ]

    def test_rescan_deterministic(self):
        assert scan_library("stubpkg") == scan_library("stubpkg")

    def test_unimportable_library(self):
        with pytest.raises(CatalogError, match="cannot import"):
            scan_library("no_such_library_anywhere")
