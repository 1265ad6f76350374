import json as _apih_json
import sys as _apih_sys
_APIH_CAP = 4096

def _apih_trace(kind, expr, value):
    try:
        rep = repr(value)
    except Exception:
        rep = '<unrepresentable>'
    raw = rep.encode('utf-8', 'replace')
    if len(raw) > _APIH_CAP:
        rep = raw[:_APIH_CAP].decode('utf-8', 'replace') + '...<truncated>'
    _apih_sys.stderr.write('@@APIH@@' + _apih_json.dumps({'site_kind': kind, 'expression_text': expr, 'value_repr': rep}) + '\n')
    _apih_sys.stderr.flush()
    return value
import teststub
cfg = teststub.Config()
_apih_trace('assignment', 'cfg', cfg)
cfg.mode = 'fast'
_apih_trace('attribute_assignment', 'cfg.mode', cfg.mode)
cfg.mode = 'slow'
print('mode', cfg.mode)
