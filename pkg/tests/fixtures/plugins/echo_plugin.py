"""Test plugin: 'echo' returns its text, 'fail' always errors, 'garble' breaks the protocol."""

import json
import sys

for line in sys.stdin:
    req = json.loads(line)
    tool, args = req["tool"], req["args"]
    if tool == "garble":
        print("not json", flush=True)
        continue
    if tool == "hang":
        sys.stdin.readline()
        continue
    if tool == "fail":
        reply = {"call_id": req["call_id"], "ok": False, "error": "deliberate failure"}
    else:
        reply = {"call_id": req["call_id"], "ok": True, "content": args.get("text", ""),
                 "payload": {"length": len(args.get("text", ""))}}
    print(json.dumps(reply), flush=True)
