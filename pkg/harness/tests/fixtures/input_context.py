import teststub
with teststub.session("alpha") as s:
    print("inside", s.name)
