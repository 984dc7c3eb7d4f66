"""
机器可读结果输出：每行一个 key=value，写到 stdout
"""
import sys


def emit(key: str, value) -> None:
    sys.stdout.write(f"{key}={value}\n")
    sys.stdout.flush()
