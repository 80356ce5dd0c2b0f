from __future__ import annotations

import persisteval


def test_all_exports_resolve():
    for name in persisteval.__all__:
        assert hasattr(persisteval, name), f"__all__ names missing attribute {name}"


def test_version():
    assert persisteval.__version__
