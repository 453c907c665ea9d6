"""Answers every requested cell with a normal verdict.

With an argument, the received input is also copied to that path.
"""
import json
import sys

lines = sys.stdin.read().splitlines()
if len(sys.argv) > 1:
    with open(sys.argv[1], "w") as f:
        f.write("".join(line + "\n" for line in lines))

messages = [json.loads(line) for line in lines]
init = messages[0]
predict = messages[-1]
out = []
for b in predict["bins"]:
    for node in range(init["node_count"]):
        out.append(json.dumps({"type": "verdict", "node": node, "bin": b, "anomalous": False}))
out.append(json.dumps({"type": "done"}))
sys.stdout.write("\n".join(out) + "\n")
