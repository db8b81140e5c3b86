from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Conv1d, Dense, Flatten, GlobalAveragePool, conv1d_forward, global_average_pool, relu
from .network import (Network, architecture, backward, build_network, constant_network, forward,
                      glorot_init, mse_loss)
from .optim import Adam, adam_step
from .train import (History, RmseReport, TrainConfig, evaluate_rmse, fit, mean_predictor_rmse,
                    rmse_report, train)
