from stublib import _make_probe

ext_01 = _make_probe("ext_01")
ext_02 = _make_probe("ext_02")
ext_03 = _make_probe("ext_03")
ext_04 = _make_probe("ext_04")
ext_05 = _make_probe("ext_05")
ext_06 = _make_probe("ext_06")
ext_07 = _make_probe("ext_07")
ext_08 = _make_probe("ext_08")
ext_09 = _make_probe("ext_09")
ext_10 = _make_probe("ext_10")
