"""Regenerates the toy dataset fixtures. Output is deterministic."""
import json
import os
import random


def write_lines(path, lines):
    with open(path, "w") as f:
        for line in lines:
            f.write(line + "\n")


def features(rng, label, dim):
    return [round(rng.gauss(1.0 if i % 7 == label % 7 else 0.0, 0.5), 3) for i in range(dim)]


def node_dataset(name, num_nodes, num_classes, feat_dim, num_edges, same_label_edges, seed):
    rng = random.Random(seed)
    labels = [i % num_classes for i in range(num_nodes)]
    rng.shuffle(labels)
    edges = set()
    same = 0
    while len(edges) < num_edges:
        a, b = rng.randrange(num_nodes), rng.randrange(num_nodes)
        if a == b or (min(a, b), max(a, b)) in edges:
            continue
        agree = labels[a] == labels[b]
        if agree and same >= same_label_edges:
            continue
        if not agree and len(edges) - same >= num_edges - same_label_edges:
            continue
        edges.add((min(a, b), max(a, b)))
        same += agree
    os.makedirs(name, exist_ok=True)
    write_lines(f"{name}/nodes.tsv", [
        f"{i}\t{labels[i]}\t" + ",".join(str(x) for x in features(rng, labels[i], feat_dim))
        for i in range(num_nodes)
    ])
    write_lines(f"{name}/edges.tsv", [f"{a}\t{b}" for a, b in sorted(edges)])
    ids = list(range(num_nodes))
    rng.shuffle(ids)
    n_train, n_val = int(0.6 * num_nodes), int(0.2 * num_nodes)
    write_lines(f"{name}/train.txt", [str(i) for i in sorted(ids[:n_train])])
    write_lines(f"{name}/val.txt", [str(i) for i in sorted(ids[n_train:n_train + n_val])])
    write_lines(f"{name}/test.txt", [str(i) for i in sorted(ids[n_train + n_val:])])


def molecule_dataset(name, num_graphs, seed):
    rng = random.Random(seed)
    nodes, edges, graphs = [], [], []
    next_id = 0
    for g in range(num_graphs):
        label = g % 2
        size = rng.randint(4, 7)
        ids = list(range(next_id, next_id + size))
        next_id += size
        for i in ids:
            atom = rng.choice([0, 0, 1, 2]) if label == 0 else rng.choice([1, 2, 2, 3])
            nodes.append(f"{i}\t{atom}\t" + ",".join(str(x) for x in features(rng, atom, 4)) + f"\t{g}")
        for a, b in zip(ids, ids[1:]):
            edges.append(f"{a}\t{b}")
        if size > 4:
            edges.append(f"{ids[0]}\t{ids[-1]}")
        graphs.append(f"{g}\t{label}")
    os.makedirs(name, exist_ok=True)
    write_lines(f"{name}/nodes.tsv", nodes)
    write_lines(f"{name}/edges.tsv", edges)
    write_lines(f"{name}/graphs.tsv", graphs)
    order = list(range(num_graphs))
    rng.shuffle(order)
    write_lines(f"{name}/train.txt", [str(i) for i in sorted(order[:12])])
    write_lines(f"{name}/val.txt", [str(i) for i in sorted(order[12:16])])
    write_lines(f"{name}/test.txt", [str(i) for i in sorted(order[16:])])


if __name__ == "__main__":
    os.chdir(os.path.dirname(os.path.abspath(__file__)))
    node_dataset("toy-cora", 70, 7, 8, 100, 81, seed=1)
    node_dataset("toy-actor", 60, 5, 8, 100, 22, seed=2)
    molecule_dataset("toy-mol", 20, seed=3)
