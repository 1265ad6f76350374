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
x = teststub.reading()
_apih_trace('assignment', 'x', x)
_apih_t0 = x.grad
_apih_trace('condition_subexpr', 'x.grad', _apih_t0)
_apih_t1 = teststub.isbad(_apih_t0)
_apih_trace('condition_subexpr', 'teststub.isbad(x.grad)', _apih_t1)
_apih_t2 = _apih_t1.any()
_apih_trace('condition_subexpr', 'teststub.isbad(x.grad).any()', _apih_t2)
if _apih_t2:
    print('BUG FOUND')
