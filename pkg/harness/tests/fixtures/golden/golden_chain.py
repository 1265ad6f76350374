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
root = teststub.Root()
_apih_trace('assignment', 'root', root)
_apih_t0 = root.b()
_apih_trace('call_chain_step', 'root.b()', _apih_t0)
_apih_t1 = _apih_t0.c
_apih_trace('call_chain_step', 'root.b().c', _apih_t1)
_apih_t2 = _apih_t1[0]
_apih_trace('call_chain_step', 'root.b().c[0]', _apih_t2)
_apih_t3 = _apih_t2.d()
_apih_trace('call_chain_step', 'root.b().c[0].d()', _apih_t3)
out = _apih_t3
_apih_trace('assignment', 'out', out)
print('out', out)
