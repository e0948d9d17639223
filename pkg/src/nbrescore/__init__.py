"""Second-pass n-best rescoring with a toy masked-LM encoder.

Includes a small reverse-mode autodiff engine, PLL scoring, CLS-score
distillation, MWER/MWED discriminative training and beta-interpolated
reranking.
"""

__version__ = "0.1.0"
