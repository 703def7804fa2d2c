#!/usr/bin/env python3
"""Regenerate the categorical UCI fixtures under data/ from their defining rules.

Balance Scale, Tic-Tac-Toe Endgame and MONK's problem 2 are fully determined
by simple generative rules, so the fixtures are enumerated instead of downloaded.
"""
import csv
import itertools
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def balance():
    rows = []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        label = "L" if left > right else ("R" if right > left else "B")
        rows.append([lw, ld, rw, rd, label])
    return ["left_weight", "left_distance", "right_weight", "right_distance", "class"], rows


LINES = [(0, 1, 2), (3, 4, 5), (6, 7, 8), (0, 3, 6), (1, 4, 7), (2, 5, 8), (0, 4, 8), (2, 4, 6)]


def wins(board, player):
    return any(all(board[i] == player for i in line) for line in LINES)


def tic_tac_toe():
    finals = {}

    def play(board, player):
        key = tuple(board)
        if wins(board, "x") or wins(board, "o") or "b" not in board:
            finals[key] = "positive" if wins(board, "x") else "negative"
            return
        for sq in range(9):
            if board[sq] == "b":
                board[sq] = player
                play(board, "o" if player == "x" else "x")
                board[sq] = "b"

    play(["b"] * 9, "x")
    names = ["top_left", "top_middle", "top_right", "middle_left", "middle_middle",
             "middle_right", "bottom_left", "bottom_middle", "bottom_right", "class"]
    rows = [list(board) + [label] for board, label in sorted(finals.items())]
    return names, rows


def monks2():
    rows = []
    for a in itertools.product(range(1, 4), range(1, 4), range(1, 3), range(1, 4), range(1, 5), range(1, 3)):
        label = 1 if sum(v == 1 for v in a) == 2 else 0
        rows.append(list(a) + [label])
    return ["a1", "a2", "a3", "a4", "a5", "a6", "class"], rows


def write(name, header, rows):
    with open(OUT / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    print(f"{name}: {len(rows)} rows")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write("balance-scale.csv", *balance())
    write("tic-tac-toe.csv", *tic_tac_toe())
    write("monks-2.csv", *monks2())
