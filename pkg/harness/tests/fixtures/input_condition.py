import teststub
x = teststub.reading()
if teststub.isbad(x.grad).any():
    print("BUG FOUND")
