import hashlib
import json
import math
import os
import re
from typing import Any, Optional

from .config import THREADS_ENV

PI_RE = re.compile(r'^\s*(?:(?P<coef>[-+]?\d*\.?\d+)\s*\*?\s*)?pi\s*(?:/\s*(?P<den>\d*\.?\d+))?\s*$', re.I)


def sha1(s: str) -> str:
    return hashlib.sha1(s.encode('utf-8')).hexdigest()


def sha1_file(path) -> str:
    h = hashlib.sha1()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            h.update(chunk)
    return h.hexdigest()


def parse_length(token: Any) -> float:
    """
    长度参数解析：接受数字或 "pi" / "2pi" / "2*pi" / "pi/2"，
    避免把 3.14159... 手抄进命令行带来的精度损失。
    """
    if isinstance(token, (int, float)):
        return float(token)
    s = str(token).strip()
    m = PI_RE.match(s)
    if m:
        coef = float(m.group('coef')) if m.group('coef') else 1.0
        den = float(m.group('den')) if m.group('den') else 1.0
        return coef * math.pi / den
    return float(s)


def fmt17(x: float) -> str:
    """输出统一 17 位有效数字"""
    return format(float(x), '.17g')


def canonical_json(obj: Any) -> str:
    # 键排序 + 紧凑分隔：同样的配置 -> 同样的字节
    return json.dumps(obj, sort_keys=True, separators=(',', ':'), ensure_ascii=False)


def content_hash(obj: Any) -> str:
    return sha1(canonical_json(obj))


def resolve_threads(flag: Optional[int] = None) -> int:
    """--threads 优先，其次环境变量 CURLSPEC_THREADS，默认 1"""
    if flag:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV, '').strip()
    if env.isdigit() and int(env) > 0:
        return int(env)
    return 1
