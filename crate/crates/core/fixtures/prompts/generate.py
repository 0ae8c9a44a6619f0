"""Regenerates the golden prompt renders from cases.json.

The template below is the prompt function exactly as published, except for
a stray page-number token ("404 ") that the PDF extraction dropped into the
middle of the first sentence. Indentation inside the triple-quoted string
is part of the template and is kept byte for byte.

Usage: python3 generate.py
"""

import json
import pathlib


def create_prompt(query: str, retrieved: list[str]):
    retrieved = [f"- Passage {i}: {x}" for i, x in enumerate(retrieved)]
    retrieved = "\n".join(retrieved)
    prompt = f""" You are an assistant for a researcher working at the intersection of additive manufacturing and machine learning. Your goal is to help the researcher find and distill significant information in a scientific paper. To this end, answer the following triple-backtick delimited query from the researcher:
    ``` {query} ```
 To answer the question, use the following passages from the paper. If there is no information in the passages that answers the question, write "I cannot answer that."
 {retrieved}
 """
    return prompt


here = pathlib.Path(__file__).parent
for case in json.loads((here / "cases.json").read_text()):
    out = here / f"{case['name']}.golden.txt"
    out.write_bytes(create_prompt(case["query"], case["passages"]).encode("utf-8"))
    print("wrote", out.name)
