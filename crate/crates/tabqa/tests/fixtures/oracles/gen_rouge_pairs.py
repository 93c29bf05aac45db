"""Writes rouge_pairs.json with F-measures from rouge_score 0.1.2
(no stemming)."""

import json
import os

from rouge_score import rouge_scorer

PAIRS = [
    ("the cat sat", "the cat ran"),
    ("Italy had the most cyclists in the top ten.", "Italy had three cyclists in the top ten."),
    ("Hawks finished first with 12 wins.", "The Hawks won the league with 12 wins."),
    ("The film was released in 1999 and grossed $2,300,000.", "Released in 1999, the film grossed 2.3 million dollars."),
    ("Beat Royds by 1,463 votes!", "He beat Royds by a margin of 1,463 votes."),
    ("", "nothing to compare"),
    ("same words here", "same words here"),
    ("a a a b", "a b b b"),
    ("São Paulo hosted the final", "Sao Paulo hosted the final"),
    ("The 2003, 2005 and 2007 editions were held in Paris.", "Paris hosted the event in 2003, 2005, and 2007."),
    ("x", "y"),
    ("one", "one two"),
    ("Apollo 11 landed on July 20, 1969.", "On 20 July 1969 Apollo 11 landed on the Moon."),
    ("The team scored 3-1 in the semi-final.", "In the semi-final, the team won 3–1."),
    ("it was it was it was", "it was"),
    ("Smith (USA) won gold; Jones (GBR) took silver.", "Gold went to Smith of the USA and silver to Jones of GBR."),
    ("numbers only 1 2 3 4 5", "5 4 3 2 1"),
    ("THE UPPER CASE SENTENCE", "the upper case sentence"),
    ("he served from 1990 to 1995 as mayor of the town", "from 1990 to 1995 he was the town mayor"),
    ("!!!", "..."),
]


def main():
    scorer = rouge_scorer.RougeScorer(["rouge1", "rouge2", "rougeL"], use_stemmer=False)
    out = []
    for pred, gold in PAIRS:
        s = scorer.score(target=gold, prediction=pred)
        out.append({
            "pred": pred,
            "gold": gold,
            "rouge_1": s["rouge1"].fmeasure,
            "rouge_2": s["rouge2"].fmeasure,
            "rouge_l": s["rougeL"].fmeasure,
        })
    here = os.path.dirname(os.path.abspath(__file__))
    with open(os.path.join(here, "rouge_pairs.json"), "w", encoding="utf-8") as f:
        json.dump(out, f, ensure_ascii=False, indent=1)
        f.write("\n")
    print(len(out), "pairs")


if __name__ == "__main__":
    main()
