VERSION = "1.02.00"

CHANGELOG = [
    {
        "version": "1.02.00",
        "date": "2026-10-18",
        "title": "Piecewise learning & experiments",
        "changes": [
            "Piecewise composite-likelihood learning over the parameter graph.",
            "Experiment command for inference timing, learning, MCAR, piecewise and limitation runs.",
            "Learned-model JSON carries a report object and the version that produced it.",
        ],
    },
    {
        "version": "1.01.00",
        "date": "2026-10-11",
        "title": "Sampling & learning",
        "changes": [
            "Conditional-method sampler with cached sampling clique trees.",
            "Gradient descent, L-BFGS with restart and L-BFGS with barrier.",
            "Missing and censored observations in the energy.",
        ],
    },
    {
        "version": "1.00.00",
        "date": "2026-10-04",
        "title": "Inference",
        "changes": [
            "Clayton and bivariate normal copula factors with log-space partials.",
            "Min-fill clique trees and derivative-sum-product message passing.",
            "Discrete finite-difference probability mass function.",
        ],
    },
]
