"""Write the 5,000-sample MNIST subset bundled with mlxtend as gzipped IDX files.

Usage: python3 scripts/mnist5k_to_idx.py path/to/mlxtend-*.whl data/mnist-5k

The bundled rows are sorted by label with 500 samples per digit. The first
400 of each digit go to the training split and the remaining 100 to the test
split; each split is then shuffled with a fixed seed so that any prefix is
roughly class balanced.
"""
import gzip
import io
import random
import struct
import sys
import zipfile


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as z:
        raw = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz"))
    rows = [line.split(",") for line in raw.decode().strip().splitlines()]
    samples = [(int(r[-1]), bytes(int(v) for v in r[:-1])) for r in rows]
    assert all(len(p) == 784 for _, p in samples)
    train, test = [], []
    for digit in range(10):
        of_digit = [s for s in samples if s[0] == digit]
        train += of_digit[:400]
        test += of_digit[400:]
    rng = random.Random(20240601)
    rng.shuffle(train)
    rng.shuffle(test)

    def write(name, magic, dims, payload):
        buf = io.BytesIO()
        buf.write(struct.pack(">I", magic))
        for d in dims:
            buf.write(struct.pack(">I", d))
        buf.write(payload)
        with gzip.GzipFile(f"{out_dir}/{name}", "wb", mtime=0) as f:
            f.write(buf.getvalue())

    for split, part in (("train", train), ("t10k", test)):
        n = len(part)
        write(f"{split}-images-idx3-ubyte.gz", 0x00000803, (n, 28, 28),
              b"".join(p for _, p in part))
        write(f"{split}-labels-idx1-ubyte.gz", 0x00000801, (n,),
              bytes(l for l, _ in part))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
