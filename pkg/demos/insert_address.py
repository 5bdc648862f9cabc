"""Update a customer's address, or append a new customer when the ID is absent."""

from tmkit import Relation, Store, insert_address

store = Store({"customers": Relation.flat(["ID"], [
    {"ID": "1", "Address": "12 Oak St"},
    {"ID": "2", "Address": "9 Elm Rd"},
    {"ID": "3", "Address": "4 Pine Ave"},
])})

for request in ({"ID": "2", "Address": "77 Cedar Ct"}, {"ID": "8", "Address": "1 Birch Ln"}):
    new, trace = insert_address(store, request)
    print("request", request)
    print("  events:", " ".join(name + (f"[{g}]" if g else "") for name, g in trace.events))
    print("  steps: ", len(trace.steps))
    for record in new["customers"].records:
        print("   ", record)
