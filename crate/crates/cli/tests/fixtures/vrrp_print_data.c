void vrrp_print_data(FILE *data)
{
    if (!data) {
        log_message(LOG_INFO, "Can't open dump file");
        dump_failed = 1;
    } else
        file = data = fopen(dump_file, "w");
    written = fputs(dump_buf, file);
    log_status(written);
}
