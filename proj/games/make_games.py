#!/usr/bin/env python3
# Copyright 2026 The trajq Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Regenerates games/egg.json and games/troll.json.

Both quests are small slices of the opening of Zork I. The troll quest tracks
inventory and door state, so its rooms are expanded into one FST state per
reachable (room, flags) combination.
"""

import json
import os
from collections import deque

HERE = os.path.dirname(os.path.abspath(__file__))

CANT_GO = "You can't go that way."

WEST_OF_HOUSE = ("West of House You are standing in an open field west of a white house, "
                 "with a boarded front door. There is a small mailbox here.")
NORTH_OF_HOUSE = ("North of House You are facing the north side of a white house. There is "
                  "no door here, and all the windows are boarded up. To the north a narrow "
                  "path winds through the trees.")
FOREST_PATH = ("Forest Path This is a path winding through a dimly lit forest. The path heads "
               "north-south here. One particularly large tree with some low branches stands "
               "at the edge of the path.")
UP_A_TREE = ("Up a Tree You are about 10 feet above the ground nestled among some large "
             "branches. The nearest branch above you is above your reach. Beside you on the "
             "branch is a small bird's nest. In the bird's nest is a large egg encrusted with "
             "precious jewels, apparently scavenged by a childless songbird. The egg is covered "
             "with fine gold inlay, and ornamented in lapis lazuli and mother-of-pearl. Unlike "
             "most eggs, this one is hinged and closed with a delicate looking clasp. The egg "
             "appears extremely fragile.")
SOUTH_OF_HOUSE = ("South of House You are facing the south side of a white house. There is no "
                  "door here, and all the windows are boarded.")
FOREST_WEST = ("Forest This is a forest, with trees in all directions. To the east, there "
               "appears to be sunlight.")
FOREST_EAST = "Forest This is a dimly lit forest, with large trees all around."
CLEARING = ("Clearing You are in a clearing, with a forest surrounding you on all sides. A "
            "path leads south.")


def behind_house(window_open):
    state = "open" if window_open else "slightly ajar"
    return ("Behind House You are behind the white house. A path leads into the forest to "
            "the east. In one corner of the house there is a small window which is " + state + ".")


def write(name, doc):
    path = os.path.join(HERE, name)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")
    print(f"{path}: {len(doc['states'])} states, {len(doc['actions'])} actions, "
          f"{len(doc['transitions'])} transitions")


def egg_quest():
    nav = ["go north", "go south", "go east", "go west",
           "go northeast", "go northwest", "go southeast", "go southwest"]
    actions = nav + ["climb tree", "climb down", "take the egg"]
    rooms = {
        "west_of_house": WEST_OF_HOUSE,
        "north_of_house": NORTH_OF_HOUSE,
        "south_of_house": SOUTH_OF_HOUSE,
        "behind_house": behind_house(False),
        "forest_path": FOREST_PATH,
        "up_a_tree": UP_A_TREE,
        "forest_west": FOREST_WEST,
        "forest_east": FOREST_EAST,
        "clearing": CLEARING,
    }
    exits = {
        "west_of_house": {"go north": "north_of_house", "go south": "south_of_house",
                          "go west": "forest_west", "go northeast": "north_of_house",
                          "go southeast": "south_of_house"},
        "north_of_house": {"go north": "forest_path", "go west": "west_of_house",
                           "go east": "behind_house", "go southwest": "west_of_house",
                           "go southeast": "behind_house"},
        "south_of_house": {"go west": "west_of_house", "go east": "behind_house",
                           "go northwest": "west_of_house", "go northeast": "behind_house"},
        "behind_house": {"go north": "north_of_house", "go south": "south_of_house",
                         "go east": "clearing", "go northwest": "north_of_house",
                         "go southwest": "south_of_house"},
        "forest_path": {"go north": "clearing", "go south": "north_of_house",
                        "go east": "forest_east", "go west": "forest_west"},
        "forest_west": {"go east": "forest_path", "go north": "clearing",
                        "go south": "west_of_house"},
        "forest_east": {"go west": "forest_path", "go north": "clearing",
                        "go south": "behind_house"},
        "clearing": {"go south": "forest_path", "go east": "forest_east",
                     "go west": "forest_west"},
        "up_a_tree": {},
    }
    special = {
        ("west_of_house", "go east"): "The door is boarded and you can't remove the boards.",
        ("north_of_house", "go south"): "The windows are all boarded.",
        ("south_of_house", "go north"): "The windows are all boarded.",
        ("behind_house", "go west"): "The window is slightly ajar, but not enough to allow entry.",
        ("up_a_tree", "go north"): "You cannot climb any higher.",
    }
    transitions = []

    def add(state, action, nxt, master, reward=0):
        transitions.append({"state": state, "action": action, "branches": [
            {"p": 1.0, "next": nxt, "master": master, "reward": reward}]})

    for room, desc in rooms.items():
        for a in nav:
            if a in exits[room]:
                dest = exits[room][a]
                add(room, a, dest, rooms[dest])
            else:
                add(room, a, room, special.get((room, a), CANT_GO))
        if room == "forest_path":
            add(room, "climb tree", "up_a_tree", UP_A_TREE)
        elif room == "up_a_tree":
            add(room, "climb tree", room, "You cannot climb any higher.")
            add(room, "climb down", "forest_path", FOREST_PATH)
            add(room, "take the egg", "egg_taken", "Taken.", 5)
        else:
            add(room, "climb tree", room, "There is no tree here suitable for climbing.")
            add(room, "climb down", room, "You can't go down from here.")
            add(room, "take the egg", room, "You can't see any egg here!")

    states = {r: {"terminal": False} for r in rooms}
    states["egg_taken"] = {"terminal": True}
    return {
        "actions": actions,
        "initial_state": "west_of_house",
        "initial_master": WEST_OF_HOUSE,
        "default_failure_master": "You can't do that.",
        "states": states,
        "transitions": transitions,
    }


# --- troll quest --------------------------------------------------------------

TROLL_NAV = ["go north", "go south", "go east", "go west",
             "go up", "go down", "go northeast", "go southwest"]
TROLL_ESSENTIAL = ["open window", "enter house", "take sword", "take lantern", "move rug",
                   "open trap door", "turn on lantern", "kill troll with sword"]
TROLL_OTHER = ["open mailbox", "look", "inventory", "open sack", "turn off lantern"]

KITCHEN = ("Kitchen You are in the kitchen of the white house. A table seems to have been used "
           "recently for the preparation of food. A passage leads to the west and a dark "
           "staircase can be seen leading upward. A dark chimney leads down and to the east is "
           "a small window which is open. On the table is an elongated brown sack, smelling of "
           "hot peppers.")
ATTIC = ("Attic This is the attic. The only exit is a stairway leading down. A large coil of "
         "rope is lying in the corner. On a table is a nasty-looking knife.")
CELLAR = ("Cellar You are in a dark and damp cellar with a narrow passageway leading north, "
          "and a crawlway to the south. On the west is the bottom of a steep metal ramp which "
          "is unclimbable.")
TROLL_ROOM = ("The Troll Room This is a small room with passages to the east and south and a "
              "forbidding hole leading west. Bloodstains and deep scratches (perhaps made by an "
              "axe) mar the walls. A nasty-looking troll, brandishing a bloody axe, blocks all "
              "passages out of the room.")
PITCH_BLACK = "It is pitch black. You are likely to be eaten by a grue."
GRUE = "Oh, no! You have walked into the slavering fangs of a lurking grue! You have died."
TRAP_SHUT = "The trap door crashes shut, and you hear someone barring it."
TROLL_WIN = ("The troll takes a fatal blow and slumps to the floor dead. Almost as soon as the "
             "troll breathes his last breath, a cloud of sinister black fog envelops him, and "
             "when the fog lifts, the carcass has disappeared.")
TROLL_LOSS = "The troll's axe swings and removes your head. You have died."


def living_room(f):
    text = ("Living Room You are in the living room. There is a doorway to the east, a wooden "
            "door with strange gothic lettering to the west, which appears to be nailed shut, "
            "a trophy case")
    if not f["rug"]:
        text += ", and a large oriental rug in the center of the room."
    elif f["trap"]:
        text += ", and a rug lying beside an open trap door."
    else:
        text += ", and a closed trap door at your feet."
    if not f["sword"]:
        text += " Above the trophy case hangs an elvish sword of great antiquity."
    if not f["lantern"]:
        text += " A battery-powered brass lantern is on the trophy case."
    return text


def inventory(f):
    items = []
    if f["sword"]:
        items.append("A sword")
    if f["lantern"]:
        items.append("A brass lantern (providing light)" if f["on"] else "A brass lantern")
    if not items:
        return "You are empty-handed."
    return "You are carrying: " + ". ".join(items) + "."


def troll_quest():
    actions = TROLL_NAV + TROLL_ESSENTIAL + TROLL_OTHER
    assert len(actions) == 21 and len(set(actions)) == 21

    outside = {"west_of_house", "north_of_house", "south_of_house", "behind_house",
               "forest_path"}
    dark = {"cellar", "troll_room"}

    def key(room, f):
        if room in ("victory", "dead"):
            return room
        bits = "".join(f"{k[0]}{int(f[k])}" for k in sorted(f))
        return f"{room}|{bits}"

    def describe(room, f):
        if room in dark and not f["on"]:
            return PITCH_BLACK
        return {
            "west_of_house": WEST_OF_HOUSE,
            "north_of_house": NORTH_OF_HOUSE,
            "south_of_house": SOUTH_OF_HOUSE,
            "behind_house": behind_house(f["window"]),
            "forest_path": FOREST_PATH,
            "kitchen": KITCHEN,
            "living_room": living_room(f),
            "attic": ATTIC,
            "cellar": CELLAR,
            "troll_room": TROLL_ROOM,
        }[room]

    moves = {
        "west_of_house": {"go north": "north_of_house", "go south": "south_of_house",
                          "go northeast": "north_of_house"},
        "north_of_house": {"go north": "forest_path", "go west": "west_of_house",
                           "go east": "behind_house", "go southwest": "west_of_house"},
        "south_of_house": {"go west": "west_of_house", "go east": "behind_house",
                           "go northeast": "behind_house"},
        "behind_house": {"go north": "north_of_house", "go south": "south_of_house"},
        "forest_path": {"go south": "north_of_house"},
        "kitchen": {"go west": "living_room", "go up": "attic", "go east": "behind_house"},
        "living_room": {"go east": "kitchen"},
        "attic": {"go down": "kitchen"},
        "cellar": {"go north": "troll_room"},
        "troll_room": {},
    }

    def outcome(room, f, a):
        """Returns a list of (p, room, flags, master, reward)."""
        g = dict(f)
        same = [(1.0, room, f, None, 0)]

        def say(text):
            return [(1.0, room, f, text, 0)]

        is_dark = room in dark and not f["on"]
        if a in TROLL_NAV:
            if is_dark:
                return [(1.0, "dead", f, GRUE, 0)]
            if room == "behind_house" and a == "go west":
                if f["window"]:
                    return enter_kitchen(f)
                return say("The window is slightly ajar, but not enough to allow entry.")
            if room == "living_room" and a == "go down":
                if f["trap"]:
                    lit = f["on"]
                    text = TRAP_SHUT + " " + (CELLAR if lit else PITCH_BLACK)
                    g["trap"] = False
                    return [(1.0, "cellar", g, text, 25)]
                if f["rug"]:
                    return say("The trap door is closed.")
                return say(CANT_GO)
            if room == "living_room" and a == "go west":
                return say("The door is nailed shut.")
            if room == "cellar" and a == "go up":
                return say("The trap door is closed.")
            if room == "troll_room":
                return say("The troll fends you off with a menacing gesture.")
            if room == "west_of_house" and a == "go east":
                return say("The door is boarded and you can't remove the boards.")
            if room in ("north_of_house", "south_of_house") and a in ("go south", "go north"):
                return say("The windows are all boarded.")
            dest = moves[room].get(a)
            if dest is None:
                return say(CANT_GO)
            return [(1.0, dest, f, describe(dest, f), 0)]

        if a == "look":
            return say(describe(room, f))
        if a == "inventory":
            return say(inventory(f))
        if a == "open mailbox":
            if room == "west_of_house":
                return say("Opening the small mailbox reveals a leaflet.")
            return say("You can't see any mailbox here!")
        if a == "open sack":
            if room == "kitchen":
                return say("Opening the brown sack reveals a lunch, and a clove of garlic.")
            return say("You can't see any sack here!")
        if a == "open window":
            if room == "behind_house":
                if f["window"]:
                    return say("Too late for that.")
                g["window"] = True
                return [(1.0, room, g,
                         "With great effort, you open the window far enough to allow entry.", 0)]
            if room == "kitchen":
                return say("Too late for that.")
            return say("You can't see any window here!")
        if a == "enter house":
            if room == "behind_house":
                if f["window"]:
                    return enter_kitchen(f)
                return say("The kitchen window is closed.")
            if room in outside:
                return say(CANT_GO)
            return say("You are already inside the house.")
        if a in ("take sword", "take lantern"):
            item = "sword" if a == "take sword" else "lantern"
            if f[item]:
                return say("You already have that!")
            if room == "living_room":
                g[item] = True
                return [(1.0, room, g, "Taken.", 0)]
            if is_dark:
                return say("It is too dark to see.")
            return say(f"You can't see any {item} here!")
        if a == "move rug":
            if room != "living_room":
                return say("You can't see any rug here!")
            if f["rug"]:
                return say("Having moved the carpet previously, you find it impossible to move "
                           "it again.")
            g["rug"] = True
            return [(1.0, room, g, "With a great effort, the rug is moved to one side of the "
                     "room, revealing the dusty cover of a closed trap door.", 0)]
        if a == "open trap door":
            if room == "living_room" and f["rug"]:
                if f["trap"]:
                    return say("Too late for that.")
                g["trap"] = True
                return [(1.0, room, g, "The door reluctantly opens to reveal a rickety "
                         "staircase descending into darkness.", 0)]
            return say("You can't see any trap door here!")
        if a == "turn on lantern":
            if not f["lantern"]:
                return say("You can't see any lantern here!")
            if f["on"]:
                return say("It is already on.")
            g["on"] = True
            text = "The brass lantern is now on."
            if room in dark:
                text += " " + describe(room, g)
            return [(1.0, room, g, text, 0)]
        if a == "turn off lantern":
            if not f["lantern"]:
                return say("You can't see any lantern here!")
            if not f["on"]:
                return say("It is already off.")
            g["on"] = False
            text = "The brass lantern is now off."
            if room in dark:
                text += " " + PITCH_BLACK
            return [(1.0, room, g, text, 0)]
        if a == "kill troll with sword":
            if room != "troll_room":
                return say("You can't see any troll here!")
            if is_dark:
                return say("It is too dark to see.")
            if not f["sword"]:
                return say("You don't have the sword.")
            return [(0.7, "victory", f, TROLL_WIN, 10), (0.3, "dead", f, TROLL_LOSS, 0)]
        raise AssertionError(a)

    def enter_kitchen(f):
        g = dict(f)
        reward = 0 if f["kitchen"] else 10
        g["kitchen"] = True
        return [(1.0, "kitchen", g, KITCHEN, reward)]

    start_flags = {"window": False, "kitchen": False, "sword": False, "lantern": False,
                   "on": False, "rug": False, "trap": False}
    start = ("west_of_house", start_flags)
    states = {}
    transitions = []
    seen = {key(*start)}
    queue = deque([start])
    while queue:
        room, f = queue.popleft()
        k = key(room, f)
        states[k] = {"terminal": False}
        for a in actions:
            branches = []
            for p, nroom, nf, master, reward in outcome(room, f, a):
                nk = key(nroom, nf)
                branches.append({"p": p, "next": nk, "master": master, "reward": reward})
                if nroom in ("victory", "dead"):
                    states[nk] = {"terminal": True}
                elif nk not in seen:
                    seen.add(nk)
                    queue.append((nroom, nf))
            transitions.append({"state": k, "action": a, "branches": branches})

    return {
        "actions": actions,
        "initial_state": key(*start),
        "initial_master": WEST_OF_HOUSE,
        "default_failure_master": "You can't do that.",
        "states": states,
        "transitions": transitions,
    }


if __name__ == "__main__":
    write("egg.json", egg_quest())
    write("troll.json", troll_quest())
