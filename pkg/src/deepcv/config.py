"""Configuration for deep Chan-Vese segmentation.

All numeric defaults, tolerances, and prior presets are defined here as class variables.
This enables easy modification without changing code throughout the library.
"""


class DeepCVConfig:
    """Configuration for deep Chan-Vese segmentation.

    All numeric defaults, tolerances, and prior presets are defined here as class variables.
    This enables easy modification without changing code throughout the library.
    """

    # Energy weights
    DEFAULT_NU: float = 1.0
    DEFAULT_LAMBDA: float = 10.0
    DEFAULT_MC_SAMPLES: int = 1

    # Single-image / multi-phase optimization
    DEFAULT_LEARNING_RATE: float = 1e-1
    DEFAULT_ADAM_BETAS: tuple[float, float] = (0.9, 0.999)
    DEFAULT_MAX_ITERS: int = 1000
    EARLY_STOP_WINDOW: int = 20
    EARLY_STOP_REL_TOL: float = 1e-5
    DESCENT_TOL_FACTOR: float = 1e-6
    W_STEP_TOL: float = 1e-9
    RANDOM_INIT_AMPLITUDE: float = 0.1

    # Classical baselines
    BASELINE_LEARNING_RATE: float = 1e-1
    BASELINE_MAX_ITERS: int = 300
    BASELINE_VARIANCE_FLOOR: float = 1e-4

    # Numerical floors and clamps
    VARIANCE_FLOOR: float = 1e-6
    PROB_CLAMP: float = 1e-7

    # Network architecture
    UNET_DEPTH: int = 4
    UNET_BASE_CHANNELS: int = 32
    UNET_ACTIVATION: str = "silu"
    DISCRIMINATOR_CHANNELS: tuple[int, ...] = (32, 64, 128, 256, 512)

    # Dataset training
    DATASET_BATCH_SIZE: int = 128
    DATASET_LEARNING_RATE: float = 1e-3
    DATASET_EPOCHS: int = 50
    DATASET_IMAGE_SIZE: int = 128
    DATASET_SPLIT_FRACTIONS: tuple[float, float, float] = (0.75, 0.125, 0.125)
    IMAGE_EXTENSIONS: tuple[str, ...] = (".png", ".jpg", ".jpeg")

    # Metrics
    MAX_EXHAUSTIVE_PHASES: int = 8

    # Latent prior presets: name -> (means, variances)
    PRIOR_PRESETS: dict[str, tuple[list[list[float]], list[list[float]]]] = {
        "single": ([[10.0], [-10.0]], [[1.0], [1.0]]),
        "dataset": ([[-3.0], [3.0]], [[1.0], [1.0]]),
    }
    MULTIPHASE_PRIOR_SCALE: float = 5.0

    # Output file names
    REPORT_FILENAME: str = "report.json"
    TRACE_FILENAME: str = "trace.csv"
    RUN_CONFIG_FILENAME: str = "run_config.toml"
    EPOCHS_FILENAME: str = "epochs.csv"
    TRAINING_REPORT_FILENAME: str = "training_report.json"
    SCORES_FILENAME: str = "scores.csv"
    SUMMARY_FILENAME: str = "summary.json"
    NOISE_SWEEP_FILENAME: str = "noise_sweep.csv"
    TRACE_COLUMNS: tuple[str, ...] = (
        "iter",
        "reconstruction",
        "kl",
        "tv",
        "penalty",
        "aug_bce",
        "cri",
        "total",
    )

    @classmethod
    def get_prior_preset(
        cls, name: str, n_phases: int = 2
    ) -> tuple[list[list[float]], list[list[float]]]:
        """Get prior means and variances for a named preset.

        The ``multiphase`` preset places region i at 5·e_i in an N-dimensional latent space
        with identity covariance.

        Args:
            name: Preset name ("single", "multiphase", "dataset")
            n_phases: Number of regions (only used by "multiphase")

        Returns:
            Tuple of (means, variances), one d-vector per region

        Raises:
            ValueError: If name not found
        """
        if name == "multiphase":
            means = [
                [cls.MULTIPHASE_PRIOR_SCALE if j == i else 0.0 for j in range(n_phases)]
                for i in range(n_phases)
            ]
            variances = [[1.0] * n_phases for _ in range(n_phases)]
            return means, variances

        if name not in cls.PRIOR_PRESETS:
            msg = (
                f"Unknown prior preset: {name}. "
                f"Available: {[*cls.PRIOR_PRESETS.keys(), 'multiphase']}"
            )
            raise ValueError(msg)
        means, variances = cls.PRIOR_PRESETS[name]
        return [list(m) for m in means], [list(v) for v in variances]
