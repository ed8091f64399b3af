from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"


def read_trace_us(name):
    """Timestamps of a fixture trace in microseconds."""
    out = []
    for line in (FIXTURES / name).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(float(line) * 1e6)
    return out
