"""Walk one sentence through extract -> edit -> evaluate.

Pretrains a small model briefly so the embeddings mean something, then
shows the retrieval set M, the edited set M', and the ranking
distribution over the edited candidates plus the model's own translation.

Run with: python demos/03_extract_edit_walkthrough.py  (about a minute)
"""

import numpy as np

from extractedit import CipherSpec, generate_cipher_pair
from extractedit.cipher import full_vocab_dictionary
from extractedit.engine import build_index, edit, extract_topk, score_candidates
from extractedit.model import TGT
from extractedit.tensor import Tensor
from extractedit.training import TrainConfig, Trainer

spec = CipherSpec(vocab_size=40, seed=3, substitution_seed=5, window=1,
                  n_train=400, n_valid=40, n_test=40, len_min=3, len_max=8)
pair = generate_cipher_pair(spec)
cfg = TrainConfig(seed=0, hidden_size=32, layers=1, eval_hidden=32, eval_out=32,
                  batch_size=16, k=5, pretrain_steps=600, main_steps=0,
                  valid_interval=0, max_len=10, lr=1e-3)
trainer = Trainer(cfg, pair.vocab, pair.src_train, pair.tgt_train,
                  pair.src_valid, pair.tgt_valid,
                  oracle_dictionary=full_vocab_dictionary(pair))
print("pretraining a small model...")
trainer.run()

vocab = pair.vocab
source = pair.gold[0][0]
print("\nsource sentence: ", " ".join(vocab.decode(source)))
print("gold translation:", " ".join(vocab.decode(pair.gold[0][1])))

# extract: top-k real target sentences by L2 distance in embedding space
index = build_index(pair.tgt_train, trainer.model, episode=0)
_, e_s = trainer.model.encode(source)
idx, dist = extract_topk(e_s.data, index, k=5)
print("\nextracted set M:")
for i, d in zip(idx, dist):
    print(f"   [{i}] d={d:.3f}  ", " ".join(vocab.decode(pair.tgt_train[int(i)])))

# edit: max-pool each extraction's embedding with the source's, re-decode
print("\nedited set M':")
edited = []
for i in idx:
    t_new, _ = edit(e_s.data, pair.tgt_train[int(i)], trainer.model, TGT)
    edited.append(t_new)
    print("   ", " ".join(vocab.decode(t_new)))

# evaluate: rank the model's own translation among the edited candidates
t_star, _ = trainer.model.translate_batch([source], TGT)
print("\nmodel translation t*:", " ".join(vocab.decode(t_star[0])))
cands = [Tensor(trainer.model.encode(e)[1].data) for e in edited]
cands.append(Tensor(trainer.model.encode(t_star[0])[1].data))
probs = score_candidates(Tensor(e_s.data), cands, trainer.evaluator, 0.5)
print("ranking distribution over M' + {t*}:",
      np.array2string(probs.data, precision=3))
print(f"P(t*) = {probs.data[-1]:.3f}")
