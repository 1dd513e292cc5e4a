"""Regenerate the bundled data files under src/storyeval/data/.

Everything here is deterministic: corpus and prompts come from a seeded
template grammar, embeddings from per-word keyed hashes, ratings likewise.
Rerunning the script reproduces the files byte for byte.

Usage: python3 tools/make_resources.py
"""

from __future__ import annotations

import hashlib
import math
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from storyeval import textops  # noqa: E402
from storyeval.resources import build_unigram_table, save_unigram_table  # noqa: E402
from storyeval.rng import SplitMix64  # noqa: E402

DATA_DIR = ROOT / "src" / "storyeval" / "data"
CORPUS_SEED = 0x5EEDC0DE
PROMPT_SEED = 0x5EEDBEEF
TARGET_TOKENS = 50_000
N_PROMPTS = 200
EMBED_DIM = 16

# ---------------------------------------------------------------------------
# Word pools

NOUNS = (
    "house door window garden gate wall tower bridge road path river lake sea shore "
    "island mountain valley forest tree branch leaf root stone rock cave cliff field "
    "meadow farm barn well fountain square market shop inn tavern hall castle palace "
    "throne crown sword shield armor cloak boot glove ring jewel coin purse chest key "
    "lock chain rope ladder cart wheel horse dog cat bird crow owl wolf bear fox deer "
    "rabbit fish whale ship boat sail mast anchor harbor dock lantern candle torch "
    "fire smoke ash ember hearth kitchen table chair bed blanket pillow mirror clock "
    "bell book page letter ink quill map scroll painting portrait frame statue bone "
    "skull ghost spirit shadow dream nightmare memory story song tune drum flute "
    "harp voice whisper shout cry laugh tear smile frown face eye hand finger arm "
    "shoulder heart blood breath wound scar cloakroom cellar attic stair roof chimney "
    "rain storm thunder lightning wind cloud fog mist frost snow ice sun moon star "
    "sky dawn dusk night morning evening winter spring summer autumn harvest bread "
    "soup stew apple berry honey milk tea wine cup plate knife basket sack wagon "
    "village town city kingdom border camp tent flag army soldier guard captain "
    "general king queen prince princess duke knight squire wizard witch monk priest "
    "merchant sailor fisherman hunter farmer baker smith miller weaver tailor doctor "
    "teacher child boy girl man woman mother father brother sister uncle aunt "
    "stranger traveler guest neighbor friend enemy thief crowd family council court "
    "television darkness idea hope secret promise danger silence courage fear truth"
).split()

VERBS = (
    # (lemma, past)
    ("walk", "walked"), ("run", "ran"), ("ride", "rode"), ("climb", "climbed"),
    ("jump", "jumped"), ("fall", "fell"), ("stand", "stood"), ("sit", "sat"),
    ("lie", "lay"), ("sleep", "slept"), ("wake", "woke"), ("rise", "rose"),
    ("open", "opened"), ("close", "closed"), ("lock", "locked"), ("break", "broke"),
    ("build", "built"), ("carry", "carried"), ("lift", "lifted"), ("drop", "dropped"),
    ("throw", "threw"), ("catch", "caught"), ("hold", "held"), ("pull", "pulled"),
    ("push", "pushed"), ("cut", "cut"), ("dig", "dug"), ("plant", "planted"),
    ("grow", "grew"), ("burn", "burned"), ("freeze", "froze"), ("melt", "melted"),
    ("pour", "poured"), ("drink", "drank"), ("eat", "ate"), ("cook", "cooked"),
    ("bake", "baked"), ("hunt", "hunted"), ("fish", "fished"), ("sail", "sailed"),
    ("row", "rowed"), ("swim", "swam"), ("dive", "dove"), ("fly", "flew"),
    ("travel", "traveled"), ("arrive", "arrived"), ("leave", "left"), ("return", "returned"),
    ("enter", "entered"), ("escape", "escaped"), ("hide", "hid"), ("seek", "sought"),
    ("find", "found"), ("lose", "lost"), ("steal", "stole"), ("give", "gave"),
    ("take", "took"), ("send", "sent"), ("bring", "brought"), ("keep", "kept"),
    ("sell", "sold"), ("buy", "bought"), ("trade", "traded"), ("count", "counted"),
    ("measure", "measured"), ("weigh", "weighed"), ("write", "wrote"), ("read", "read"),
    ("draw", "drew"), ("paint", "painted"), ("sing", "sang"), ("play", "played"),
    ("dance", "danced"), ("listen", "listened"), ("hear", "heard"), ("see", "saw"),
    ("watch", "watched"), ("look", "looked"), ("stare", "stared"), ("glance", "glanced"),
    ("notice", "noticed"), ("remember", "remembered"), ("forget", "forgot"),
    ("dream", "dreamed"), ("think", "thought"), ("know", "knew"), ("learn", "learned"),
    ("teach", "taught"), ("understand", "understood"), ("believe", "believed"),
    ("doubt", "doubted"), ("hope", "hoped"), ("fear", "feared"), ("love", "loved"),
    ("hate", "hated"), ("trust", "trusted"), ("promise", "promised"), ("lie", "lied"),
    ("talk", "talked"), ("speak", "spoke"), ("tell", "told"), ("ask", "asked"),
    ("answer", "answered"), ("call", "called"), ("shout", "shouted"), ("whisper", "whispered"),
    ("laugh", "laughed"), ("weep", "wept"), ("smile", "smiled"), ("wait", "waited"),
    ("follow", "followed"), ("lead", "led"), ("guard", "guarded"), ("fight", "fought"),
    ("win", "won"), ("surrender", "surrendered"), ("rescue", "rescued"), ("heal", "healed"),
    ("vanish", "vanished"), ("appear", "appeared"), ("change", "changed"), ("begin", "began"),
)

SAID_VERBS = ("said", "asked", "replied", "answered", "whispered", "shouted", "muttered")

ADJECTIVES = (
    "old young small large tall short wide narrow deep shallow long brief dark light "
    "bright dim pale golden silver gray white black red blue green brown crimson "
    "quiet loud silent gentle rough smooth sharp dull heavy hollow solid broken "
    "whole empty full open closed hidden secret ancient new fresh stale sweet bitter "
    "sour warm cold hot cool frozen burning wet dry damp dusty muddy clean dirty "
    "rich poor humble proud brave timid bold careful careless wise foolish clever "
    "strange familiar distant near lonely crowded peaceful restless angry calm glad "
    "sad weary eager patient stubborn curious cautious faithful jealous honest sly "
    "kind cruel fierce tame wild savage noble common royal lost forgotten famous "
    "nameless crooked straight steep gentlefolk ragged tattered splendid plain fine "
    "delicate sturdy feeble mighty tiny enormous endless sudden slow swift early late"
).split()

ADVERBS = (
    "slowly quickly quietly loudly carefully carelessly gently roughly suddenly "
    "gradually finally eventually immediately soon late early often rarely never "
    "always sometimes again once twice together alone away back forward onward "
    "upward downward inside outside nearby far deeply barely almost nearly quite "
    "rather truly surely certainly perhaps somewhere everywhere anywhere here there"
).split()

NAMES = (
    "Mira Tobias Elena Marcus Rosa Henrik Clara Stefan Greta Anton Lena Viktor "
    "Ida Oskar Nora Emil Freya Lukas Astrid Felix Ingrid Casper Liv Magnus Selma "
    "Aron Tilde Jonas Maren Soren Edith Rolf Hanna Bruno Alma Georg Vera Otto "
    "Iris Leon"
).split()

PLACES = (
    "Northport Ravenhill Stonebridge Ashford Greywater Thornfield Millbrook "
    "Oakhaven Saltmarsh Winterfell Redford Blackwood Silverlake Hollowell "
    "Eastgate Westmoor Fairhaven Duskvale Brighthollow Coldspring Amberfield "
    "Foxglove Heronmere Larkspur Mistrun Nettlewood Pinecrest Quarrytown "
    "Rushwater Seabright Tanglewood Umberley Violetmoor Wrenfield Yarrowdale"
).split()

PREPOSITIONS = "under over beside beyond behind near across through toward past around".split()

EXCLAMATIONS = (
    "Look out", "Come here", "Wait for me", "Leave this place", "Follow the river",
    "Open the gate", "Stay close", "Listen carefully", "Run for the bridge",
    "Hold the line", "Light the lantern", "Trust no one",
)

VERB_PASTS = tuple(past for _, past in VERBS)
VERB_LEMMAS = tuple(lemma for lemma, _ in VERBS)

# a few hand-set concreteness ratings on the published 1-5 scale; everything else is generated
ANCHOR_RATINGS = {
    "television": 4.83,
    "darkness": 3.85,
    "idea": 1.61,
    "talk": 4.07,
    "see": 3.21,
    "hope": 1.25,
}

NLTK_STOPWORDS = (
    "i me my myself we our ours ourselves you you're you've you'll you'd your yours "
    "yourself yourselves he him his himself she she's her hers herself it it's its "
    "itself they them their theirs themselves what which who whom this that that'll "
    "these those am is are was were be been being have has had having do does did "
    "doing a an the and but if or because as until while of at by for with about "
    "against between into through during before after above below to from up down "
    "in out on off over under again further then once here there when where why how "
    "all any both each few more most other some such no nor not only own same so "
    "than too very s t can will just don don't should should've now d ll m o re ve "
    "y ain aren aren't couldn couldn't didn didn't doesn doesn't hadn hadn't hasn "
    "hasn't haven haven't isn isn't ma mightn mightn't mustn mustn't needn needn't "
    "shan shan't shouldn shouldn't wasn wasn't weren weren't won won't wouldn wouldn't"
).split()


def pick(rng: SplitMix64, pool):
    return pool[rng.next_below(len(pool))]


def make_sentence(rng: SplitMix64) -> str:
    roll = rng.next_below(100)
    n1, n2 = pick(rng, NOUNS), pick(rng, NOUNS)
    adj = pick(rng, ADJECTIVES)
    verb = pick(rng, VERB_PASTS)
    adv = pick(rng, ADVERBS)
    name = pick(rng, NAMES)
    place = pick(rng, PLACES)
    prep = pick(rng, PREPOSITIONS)
    if roll < 16:
        return f"The {adj} {n1} {verb} {prep} the {n2}."
    if roll < 30:
        return f"{name} {verb} {adv} and {verb2(rng)} the {adj} {n1}."
    if roll < 42:
        return f"In {place} the {n1} {verb} {prep} the {adj} {n2}."
    if roll < 52:
        return f"She {verb} the {n1} and the {n2} {verb2(rng)} {adv}."
    if roll < 62:
        return f"He {verb} {prep} the {adj} {n1} before the {n2}."
    if roll < 70:
        return f"Why did the {n1} {lemma(rng)} {prep} the {n2}?"
    if roll < 78:
        said = pick(rng, SAID_VERBS)
        return f'"{pick(rng, EXCLAMATIONS)}!" {name} {said}.'
    if roll < 86:
        return f"The {n1} of {place} {verb} the {adj} {n2} {adv}."
    if roll < 93:
        return f"After the {n1} {verb}, the {adj} {n2} {verb2(rng)} {prep} {place}."
    return f"They {verb} the {n1} until the {n2} {verb2(rng)}!"


def verb2(rng: SplitMix64) -> str:
    return pick(rng, VERB_PASTS)


def lemma(rng: SplitMix64) -> str:
    return pick(rng, VERB_LEMMAS)


def make_corpus() -> str:
    rng = SplitMix64(CORPUS_SEED)
    sentences = []
    n_tokens = 0
    while n_tokens < TARGET_TOKENS:
        sent = make_sentence(rng)
        sentences.append(sent)
        n_tokens += len(textops.tokenize_words(sent))
    # paragraph breaks every 8 sentences, purely cosmetic
    lines = []
    for i in range(0, len(sentences), 8):
        lines.append(" ".join(sentences[i: i + 8]))
    return "\n".join(lines) + "\n"


def make_prompts() -> list[str]:
    rng = SplitMix64(PROMPT_SEED)
    prompts = []
    seen = set()
    while len(prompts) < N_PROMPTS:
        n1, n2 = pick(rng, NOUNS), pick(rng, NOUNS)
        adj = pick(rng, ADJECTIVES)
        place = pick(rng, PLACES)
        name = pick(rng, NAMES)
        roll = rng.next_below(4)
        if roll == 0:
            p = f"The {adj} {n1} of {place}."
        elif roll == 1:
            p = f"{name} found a {adj} {n1} in the {n2}."
        elif roll == 2:
            p = f"A {n1} and a {n2} guarded the {adj} gate of {place}."
        else:
            p = f"When the {n1} {pick(rng, VERB_PASTS)}, {name} left {place}."
        if p not in seen:
            seen.add(p)
            prompts.append(p)
    return prompts


def word_rng(word: str, salt: bytes) -> SplitMix64:
    h = hashlib.blake2b(word.encode("utf-8"), key=salt, digest_size=8)
    return SplitMix64(int.from_bytes(h.digest(), "little"))


def gauss(rng: SplitMix64) -> float:
    u1 = max(rng.next_float(), 1e-12)
    u2 = rng.next_float()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def make_embeddings(words: list[str]) -> dict[str, list[float]]:
    # category centroids keep related words loosely clustered
    pools = {
        "noun": set(NOUNS), "verb": set(VERB_PASTS) | set(VERB_LEMMAS),
        "adj": set(ADJECTIVES), "adv": set(ADVERBS),
        "name": set(NAMES), "place": set(PLACES),
    }
    centroids = {}
    for cat in sorted(pools):
        rng = word_rng(cat, b"centroid")
        centroids[cat] = [2.0 * gauss(rng) for _ in range(EMBED_DIM)]
    out = {}
    for word in words:
        cat = next((c for c, pool in sorted(pools.items()) if word in pool), None)
        base = centroids.get(cat, [0.0] * EMBED_DIM)
        rng = word_rng(word, b"embed")
        out[word] = [round(base[d] + gauss(rng), 5) for d in range(EMBED_DIM)]
    return out


def rating_for(word: str, lo: float, hi: float) -> float:
    if word in ANCHOR_RATINGS:
        return ANCHOR_RATINGS[word]
    rng = word_rng(word, b"rating")
    return round(lo + (hi - lo) * rng.next_float(), 2)


def main() -> int:
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    corpus = make_corpus()
    tokens = textops.tokenize_words(corpus)
    vocab = sorted(set(tokens))
    print(f"corpus: {len(tokens)} tokens, {len(vocab)} types")
    assert 600 <= len(vocab) <= 900, f"vocabulary size {len(vocab)} out of range"
    (DATA_DIR / "synthetic_corpus.txt").write_text(corpus, encoding="utf-8")

    prompts = make_prompts()
    (DATA_DIR / "prompts.txt").write_text("\n".join(prompts) + "\n", encoding="utf-8")
    print(f"prompts: {len(prompts)}")

    # embeddings for every alphabetic type (lowercase forms once) plus names
    emb_words = sorted(
        {w.lower() for w in vocab if w.isalpha()} | set(NAMES) | set(PLACES)
    )
    table = make_embeddings(emb_words)
    with open(DATA_DIR / "embeddings.txt", "w", encoding="utf-8") as fh:
        for word in emb_words:
            vec = " ".join(repr(v) for v in table[word])
            fh.write(f"{word} {vec}\n")
    print(f"embeddings: {len(emb_words)} words, d={EMBED_DIM}")

    with open(DATA_DIR / "concreteness.csv", "w", encoding="utf-8") as fh:
        fh.write("lemma,rating\n")
        entries = {}
        for noun in NOUNS:
            entries[noun] = rating_for(noun, 2.4, 5.0)
        for lem in VERB_LEMMAS:
            entries.setdefault(lem, rating_for(lem, 1.5, 4.5))
        for word, rating in ANCHOR_RATINGS.items():
            entries[word] = rating
        for lem in sorted(entries):
            fh.write(f"{lem},{entries[lem]}\n")
    print(f"concreteness: {len(entries)} lemmas")

    assert len(NLTK_STOPWORDS) == 179, len(NLTK_STOPWORDS)
    (DATA_DIR / "stopwords.txt").write_text(
        "\n".join(NLTK_STOPWORDS) + "\n", encoding="utf-8"
    )
    print(f"stopwords: {len(NLTK_STOPWORDS)}")

    unigrams = build_unigram_table(tokens)
    save_unigram_table(unigrams, DATA_DIR / "unigram.txt")
    print(f"unigram table: {len(unigrams.probs)} entries over {unigrams.total_tokens} tokens")
    return 0


if __name__ == "__main__":
    sys.exit(main())
